//! Static sign-language gesture classification on a frozen MobileNetV2
//! backbone.
//!
//! The crate is split the way the pipeline runs:
//!
//! - [`nnops`]: convolution, batch-norm folding, pooling, dense, softmax.
//! - [`mobilenet`]: the backbone built from those kernels, loaded from a
//!   [`weights_io`] bundle and frozen.
//! - [`datapipe`]: folder-per-class datasets, 80/20 splits, resizing, and
//!   augmentation.
//! - [`head`]: the dense classification head and its Adam training loop on
//!   cached features.
//! - [`metrics`]: confusion matrix, accuracy/loss, and latency benchmarking.

pub mod datapipe;
pub mod error;
pub mod extract;
pub mod head;
pub mod metrics;
pub mod mobilenet;
pub mod nnops;
pub mod rng;
pub mod tensor;
pub mod weights_io;

pub use error::{Error, Result};
pub use tensor::Tensor;
