//! HEp-2 cell pattern classification: a from-scratch convolutional network,
//! cell extraction and augmentation, cross-specimen evaluation and a
//! synthetic specimen generator.
//!
//! - [`nn`]: layers, network configs, parameters and checkpoints.
//! - [`data`]: cell records, extraction, augmentation and manifests.
//! - [`eval`]: split plans, confusion matrices, MCA and reports.
//! - [`train`]: the SGD loop, checkpoint ensembles and experiments.
//! - [`synth`]: synthetic specimens with tunable intra-specimen correlation.

pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor4;
