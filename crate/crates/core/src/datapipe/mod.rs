//! Folder-per-class image datasets: loading, stratified splitting, model
//! input preparation, and training-time augmentation.

mod augment;
mod dataset;
mod manifest;
mod resize;
mod split;

pub use augment::{augment, sample_params, warp, AffineParams, AugmentConfig, FillMode};
pub use dataset::{load_dataset, open_image, scan_dataset, DatasetEntry, DatasetIndex, LoadReport, LoadedDataset, Sample};
pub use manifest::{parse_manifest, write_manifest, ManifestRecord, Partition};
pub use resize::{resize_bilinear, resize_normalize, stack_batch};
pub use split::{split, Labeled, SplitDataset, DEFAULT_TRAIN_RATIO};

pub use image::RgbImage;
