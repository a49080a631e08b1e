//! The `.slrw` weight-bundle container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic        5 bytes   "SLRW1"
//! entry_count  u32
//! meta_len     u32       length of the metadata block in bytes
//! metadata     meta_len  UTF-8, one `key=value\n` line per key, keys sorted
//! entries      entry_count times:
//!   name_len   u16
//!   name       name_len bytes of UTF-8
//!   rank       u8        1..=4
//!   dims       rank × u32, each > 0
//!   data       product(dims) × f32 (IEEE-754 binary32)
//! ```
//!
//! Nothing may follow the last entry.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"SLRW1";
pub const MANIFEST_VERSION: u32 = 1;

/// Ordered collection of uniquely named tensors plus string metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightBundle {
    entries: Vec<(String, Tensor)>,
    metadata: BTreeMap<String, String>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate entry name '{name}'")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let i = self.entries.iter().position(|(n, _)| n == name)?;
        Some(self.entries.remove(i).1)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn manifest_version(&self) -> u32 {
        self.meta("manifest_version")
            .and_then(|v| v.parse().ok())
            .unwrap_or(MANIFEST_VERSION)
    }

    /// Stores `names` as `num_classes` plus one `class.{i}` key per name.
    pub fn set_class_names(&mut self, names: &[String]) {
        self.metadata.retain(|k, _| !k.starts_with("class."));
        self.set_meta("num_classes", names.len());
        for (i, n) in names.iter().enumerate() {
            self.set_meta(format!("class.{i}"), n);
        }
    }

    pub fn class_names(&self) -> Result<Vec<String>> {
        let n: usize = self
            .meta("num_classes")
            .ok_or_else(|| Error::Format("bundle metadata lacks num_classes".into()))?
            .parse()
            .map_err(|_| Error::Format("num_classes is not an integer".into()))?;
        (0..n)
            .map(|i| {
                self.meta(&format!("class.{i}"))
                    .map(str::to_owned)
                    .ok_or_else(|| Error::Format(format!("bundle metadata lacks class.{i}")))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_bundle(self, &mut buf)?;
        Ok(buf)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        read_bundle(&bytes)
    }
}

fn encode_metadata(meta: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in meta {
        if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Format(format!("metadata entry {k:?}={v:?} is not encodable")));
        }
        out.extend_from_slice(k.as_bytes());
        out.push(b'=');
        out.extend_from_slice(v.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Serializes `bundle`; output is byte-identical for identical input.
pub fn write_bundle(bundle: &WeightBundle, out: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("<bundle stream>", e);
    let count = u32::try_from(bundle.entries.len())
        .map_err(|_| Error::Format("too many entries".into()))?;
    let meta = encode_metadata(&bundle.metadata)?;
    let meta_len =
        u32::try_from(meta.len()).map_err(|_| Error::Format("metadata block too large".into()))?;

    let mut seen = std::collections::HashSet::new();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&meta_len.to_le_bytes());
    buf.extend_from_slice(&meta);
    for (name, t) in &bundle.entries {
        if !seen.insert(name.as_str()) {
            return Err(Error::Format(format!("duplicate entry name '{name}'")));
        }
        t.ensure_finite(name)?;
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("entry name longer than 65535 bytes: {name:.40}…")))?;
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(t.rank() as u8);
        for &d in t.dims() {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format(format!("entry '{name}' has a dim above u32::MAX")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.reserve(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        // Flush per entry so a large bundle is never held twice in memory.
        out.write_all(&buf).map_err(io)?;
        buf.clear();
    }
    out.write_all(&buf).map_err(io)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated stream while reading {} (need {n} bytes at offset {}, {} left)",
                what(),
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &dyn Fn() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Parses a bundle, validating every declared length against the bytes
/// actually present before allocating for it.
pub fn read_bundle(bytes: &[u8]) -> Result<WeightBundle> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(MAGIC.len(), &|| "magic".into())?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"SLRW1\"")));
    }
    let count = cur.u32(&|| "entry count".into())? as usize;
    let meta_len = cur.u32(&|| "metadata length".into())? as usize;
    let meta_bytes = cur.take(meta_len, &|| "metadata block".into())?;
    let metadata = parse_metadata(meta_bytes)?;

    // Smallest possible entry: u16 name length, empty name, rank, one dim, one float.
    const MIN_ENTRY: usize = 2 + 1 + 4 + 4;
    if count > cur.remaining() / MIN_ENTRY {
        return Err(Error::Format(format!(
            "entry count {count} cannot fit in the {} remaining bytes",
            cur.remaining()
        )));
    }

    let mut bundle = WeightBundle {
        entries: Vec::with_capacity(count),
        metadata,
    };
    for index in 0..count {
        let at_index = || format!("entry #{index}");
        let name_len = u16::from_le_bytes(cur.take(2, &at_index)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(cur.take(name_len, &at_index)?)
            .map_err(|_| Error::Format(format!("entry #{index} name is not UTF-8")))?
            .to_owned();
        let named = || format!("entry '{name}' (#{index})");
        let rank = cur.take(1, &named)?[0] as usize;
        if !(1..=4).contains(&rank) {
            return Err(Error::Format(format!("{}: rank {rank} outside 1..=4", named())));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = cur.u32(&named)? as usize;
            if d == 0 {
                return Err(Error::Format(format!("{}: zero-sized dim", named())));
            }
            dims.push(d);
        }
        let n_bytes = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= cur.remaining())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated stream while reading {}: dims {dims:?} exceed the {} remaining bytes",
                    named(),
                    cur.remaining()
                ))
            })?;
        let raw = cur.take(n_bytes, &named)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "{} holds non-finite value at element {i}",
                named()
            )));
        }
        let tensor = Tensor::new(dims, data)?;
        bundle.insert(name, tensor)?;
    }
    if cur.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after the declared {count} entries",
            cur.remaining()
        )));
    }
    Ok(bundle)
}

fn parse_metadata(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
    let mut map = BTreeMap::new();
    for line in text.split_terminator('\n') {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("metadata line {line:?} lacks '='")))?;
        if k.is_empty() || map.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(Error::Format(format!("bad or repeated metadata key {k:?}")));
        }
    }
    Ok(map)
}
