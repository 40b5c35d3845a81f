//! Gait-based scoliosis screening from silhouette sequences.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`silhouette`]: loading and size-normalizing binary silhouettes
//! - [`dataset`]: on-disk layout, manifests, splits, ratio subsampling and
//!   batch sampling
//! - [`synth`]: a deterministic synthetic walking-silhouette generator with
//!   controllable postural asymmetry
//! - [`model`]: the ScoNet family (frame encoder, temporal set pooling,
//!   horizontal part pooling, metric embedding, BNNeck classifier)
//! - [`losses`]: cross-entropy, triplet mining and the multi-task total loss
//! - [`train`]: SGD with the milestone schedule and reproducible batches
//! - [`eval`]: confusion matrix, accuracy/sensitivity/specificity, ratio study
//! - [`explain`]: gradient-weighted class activation maps over input frames
//!
//! See the `examples/` directory for runnable entry points covering each
//! capability; the `scogait` binary wraps the same calls as subcommands.

pub mod error;
pub mod nn;
pub mod dataset;
pub mod silhouette;
pub mod synth;

pub use error::{Error, Result};
