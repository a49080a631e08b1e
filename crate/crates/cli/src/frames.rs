//! Frame sources for `bench` and `stream`: an image directory, or raw RGB
//! frames on standard input, each preceded by a 16-byte header of four
//! little-endian u32s: width, height, frame id, and a reserved zero.

use std::fs;
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use slr_core::datapipe::{open_image, RgbImage};
use slr_core::{Error, Result};

pub const HEADER_LEN: usize = 16;
/// Largest accepted frame side; keeps a corrupt header from requesting
/// gigabytes.
pub const MAX_SIDE: u32 = 8192;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files directly under `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if p.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no image frames in {}", dir.display())));
    }
    Ok(paths)
}

pub struct Frame {
    pub id: u64,
    pub image: RgbImage,
}

/// Reads `buf.len()` bytes; `Ok(false)` on a clean end of input before the
/// first byte.
fn read_full(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(Error::Protocol(format!(
                    "stream ended inside a {what} ({filled} of {} bytes)",
                    buf.len()
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<stdin>", e)),
        }
    }
    Ok(true)
}

/// Next frame from a raw stream, or `None` at a clean end of input.
pub fn read_raw_frame(input: &mut impl Read) -> Result<Option<Frame>> {
    let mut header = [0u8; HEADER_LEN];
    if !read_full(input, &mut header, "frame header")? {
        return Ok(None);
    }
    let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
    let (width, height, id, reserved) = (field(0), field(1), field(2), field(3));
    if reserved != 0 {
        return Err(Error::Protocol(format!("frame {id}: reserved header field is {reserved}, expected 0")));
    }
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::Protocol(format!(
            "frame {id}: size {width}×{height} outside 1..={MAX_SIDE}"
        )));
    }
    let mut pixels = vec![0u8; width as usize * height as usize * 3];
    if !read_full(input, &mut pixels, "frame body")? {
        return Err(Error::Protocol(format!("frame {id}: stream ended before the pixel data")));
    }
    let image = RgbImage::from_raw(width, height, pixels).expect("buffer sized from the header");
    Ok(Some(Frame { id: u64::from(id), image }))
}

/// A directory's frames, numbered from 0 in file-name order.
pub fn read_dir_frame(paths: &[PathBuf], index: usize) -> Result<Frame> {
    Ok(Frame {
        id: index as u64,
        image: open_image(&paths[index])?,
    })
}
