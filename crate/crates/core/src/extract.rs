//! Batch feature extraction through the frozen backbone.

use image::RgbImage;
use rayon::prelude::*;

use crate::datapipe::{augment, resize_normalize, AugmentConfig};
use crate::error::{Error, Result};
use crate::mobilenet::Model;
use crate::rng;
use crate::tensor::Tensor;

/// Training-time augmentation for one pass over a dataset.
#[derive(Clone, Copy, Debug)]
pub struct AugmentPass {
    pub config: AugmentConfig,
    pub seed: u64,
    pub epoch: u32,
}

/// Runs `load(i)` for `i in 0..n`, optionally augments each image with its
/// own `(seed, epoch, i)` stream, and stacks the backbone features into an
/// `(n, feature_dim)` tensor. Rows come back in index order regardless of
/// `threads`.
pub fn extract_features<F>(model: &Model, n: usize, threads: usize, augment_pass: Option<AugmentPass>, load: F) -> Result<Tensor>
where
    F: Fn(usize) -> Result<RgbImage> + Sync,
{
    if n == 0 {
        return Err(Error::Data("no images to extract features from".into()));
    }
    let one = |i: usize| -> Result<Vec<f32>> {
        let mut img = load(i)?;
        if let Some(p) = &augment_pass {
            let mut r = rng::per_sample(p.seed, p.epoch, i as u32);
            img = augment(&img, &p.config, &mut r)?;
        }
        Ok(model.forward_features(&resize_normalize(&img)?)?.into_data())
    };
    let rows: Vec<Vec<f32>> = if threads <= 1 {
        (0..n).map(one).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| (0..n).into_par_iter().map(one).collect::<Result<_>>())?
    };
    let dim = model.feature_dim();
    Tensor::new(vec![n, dim], rows.concat())
}
