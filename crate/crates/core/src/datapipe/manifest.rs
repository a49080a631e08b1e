//! Split manifests: one `<class_index>\t<class_name>\t<relative_path>\t<train|val>`
//! line per sample, UTF-8, LF line endings.

use std::fmt;

use super::dataset::DatasetEntry;
use super::split::SplitDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Val,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Val => "val",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub entry: DatasetEntry,
    pub partition: Partition,
}

/// Renders `split`, ordered by class index then path.
pub fn write_manifest(split: &SplitDataset<DatasetEntry>) -> Result<String> {
    let mut rows: Vec<(&DatasetEntry, Partition)> = split
        .train
        .iter()
        .map(|e| (e, Partition::Train))
        .chain(split.val.iter().map(|e| (e, Partition::Val)))
        .collect();
    rows.sort_by(|a, b| (a.0.class_index, &a.0.rel_path).cmp(&(b.0.class_index, &b.0.rel_path)));
    let mut out = String::new();
    for (e, p) in rows {
        if [&e.class_name, &e.rel_path].iter().any(|s| s.contains(['\t', '\n', '\r'])) {
            return Err(Error::Data(format!("{:?} cannot be written to a manifest", e.rel_path)));
        }
        out.push_str(&format!("{}\t{}\t{}\t{}\n", e.class_index, e.class_name, e.rel_path, p));
    }
    Ok(out)
}

/// Parses manifest text and returns the records with the class-name table
/// they imply.
pub fn parse_manifest(text: &str) -> Result<(Vec<ManifestRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut classes: Vec<Option<String>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [idx, name, path, part] = fields[..] else {
            return Err(Error::Data(format!("manifest line {lineno}: expected 4 tab-separated fields")));
        };
        let class_index: usize = idx
            .parse()
            .map_err(|_| Error::Data(format!("manifest line {lineno}: bad class index {idx:?}")))?;
        let partition = match part {
            "train" => Partition::Train,
            "val" => Partition::Val,
            other => {
                return Err(Error::Data(format!("manifest line {lineno}: unknown partition {other:?}")));
            }
        };
        if classes.len() <= class_index {
            classes.resize(class_index + 1, None);
        }
        match &classes[class_index] {
            Some(existing) if existing != name => {
                return Err(Error::Data(format!(
                    "manifest line {lineno}: class {class_index} is both {existing:?} and {name:?}"
                )));
            }
            _ => classes[class_index] = Some(name.to_owned()),
        }
        records.push(ManifestRecord {
            entry: DatasetEntry {
                class_index,
                class_name: name.to_owned(),
                rel_path: path.to_owned(),
            },
            partition,
        });
    }
    if records.is_empty() {
        return Err(Error::Data("manifest is empty".into()));
    }
    let class_names = classes
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::Data(format!("manifest never names class index {i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((records, class_names))
}
