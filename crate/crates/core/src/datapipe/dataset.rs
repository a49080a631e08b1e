use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};

const EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// One image file in a dataset, not yet decoded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetEntry {
    pub class_index: usize,
    pub class_name: String,
    /// `<CLASS_NAME>/<file>` relative to the dataset root, `/`-separated.
    pub rel_path: String,
}

impl DatasetEntry {
    pub fn path(&self, root: &Path) -> PathBuf {
        root.join(&self.rel_path)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    /// Sorted lexicographically; a class's index is its position here.
    pub class_names: Vec<String>,
    /// Grouped by class, files lexicographic within a class.
    pub entries: Vec<DatasetEntry>,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub image: RgbImage,
    pub class_index: usize,
    pub class_name: String,
    pub source_path: String,
}

/// Files that were found but could not be decoded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub failures: Vec<(String, String)>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub report: LoadReport,
}

fn sorted_dir(path: &Path) -> Result<Vec<(String, PathBuf, bool)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        let is_dir = p.is_dir();
        let Some(name) = entry.file_name().to_str().map(str::to_owned) else {
            return Err(Error::Data(format!("non-UTF-8 file name under {}", path.display())));
        };
        out.push((name, p, is_dir));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Lists `root/<CLASS>/*.{jpg,jpeg,png}` without decoding anything.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let classes: Vec<(String, PathBuf)> = sorted_dir(root)?
        .into_iter()
        .filter(|(_, _, d)| *d)
        .map(|(n, p, _)| (n, p))
        .collect();
    if classes.is_empty() {
        return Err(Error::Data(format!(
            "dataset root {} holds no class directories",
            root.display()
        )));
    }
    let mut entries = Vec::new();
    for (class_index, (class_name, dir)) in classes.iter().enumerate() {
        for (file, _, is_dir) in sorted_dir(dir)? {
            let ext = Path::new(&file)
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if is_dir || !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
                continue;
            }
            entries.push(DatasetEntry {
                class_index,
                class_name: class_name.clone(),
                rel_path: format!("{class_name}/{file}"),
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Data(format!("dataset root {} holds no images", root.display())));
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        class_names: classes.into_iter().map(|(n, _)| n).collect(),
        entries,
    })
}

/// Decodes one image file to RGB; a missing file is an I/O error, an
/// undecodable one a data error.
pub fn open_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such image file"),
        ));
    }
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    if rgb.width() == 0 || rgb.height() == 0 {
        return Err(Error::Data(format!("{}: zero-sized image", path.display())));
    }
    Ok(rgb)
}

/// Decodes every image under `root`; undecodable files go to the report.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<LoadedDataset> {
    let index = scan_dataset(root)?;
    let mut samples = Vec::with_capacity(index.entries.len());
    let mut report = LoadReport::default();
    for e in &index.entries {
        match open_image(e.path(&index.root)) {
            Ok(image) => samples.push(Sample {
                image,
                class_index: e.class_index,
                class_name: e.class_name.clone(),
                source_path: e.rel_path.clone(),
            }),
            Err(err) => report.failures.push((e.rel_path.clone(), err.to_string())),
        }
    }
    if samples.is_empty() {
        return Err(Error::Data("no image in the dataset could be decoded".into()));
    }
    Ok(LoadedDataset {
        class_names: index.class_names,
        samples,
        report,
    })
}
