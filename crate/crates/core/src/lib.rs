//! Learn video representations directly from raw grayscale patches.
//!
//! The classic bag-of-words pipeline computes local descriptors, quantizes
//! them against a codebook and feeds the resulting histograms to a linear
//! classifier. This crate trains a multiclass boosted tree ensemble to
//! predict the codeword assignment straight from the L1-normalized pixel
//! patch, so no descriptors or codebook are needed at test time. Each
//! boosting stage carries a stopping classifier that gates early exit once
//! the cumulative prediction is confident enough, trading a configurable
//! amount of accuracy for large inference savings.
//!
//! Modules follow the pipeline order:
//!
//! - [`patchio`]: dataset manifests, PGM frames, dense patch grids, samples
//! - [`descriptors`]: HOG / HOF / temporal HOF, train-time only
//! - [`codebook`]: k-means codebooks and the identity patch-ID labeling
//! - [`dtree`]: weighted multiclass decision trees with probabilistic leaves
//! - [`boost`]: the real-valued multiclass boosting core
//! - [`wald`]: per-stage stopping trees and early-exit prediction
//! - [`encode`]: per-video bag-of-words histograms
//! - [`classify`]: linear one-vs-rest SVM and AP/MAP evaluation
//! - [`model`]: single-file binary model container
//! - [`pipeline`]: end-to-end orchestration used by the `mcwb` binary

pub mod boost;
pub mod classify;
pub mod codebook;
pub mod config;
pub mod descriptors;
pub mod dtree;
pub mod encode;
mod error;
pub mod model;
pub mod patchio;
pub mod pipeline;
pub mod synth;
pub mod wald;

pub use error::{Error, Result};
