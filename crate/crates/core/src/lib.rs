//! Numerical core of the benchmark-reliability engine.
//!
//! Everything here is pure computation over in-memory data: tensors and
//! images, the seeded generator, faithfulness perturbations, a small
//! convolutional classifier with hand-derived gradients, post-hoc saliency
//! methods, the eight faithfulness metrics, rank statistics with
//! Krippendorff's ordinal alpha, the minimum-benchmark-size solver and
//! calibration metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, process
//! bridges and the command line live in the `relbench` companion crate.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attack;
pub mod benchsize;
pub mod calib;
pub mod dataset;
mod error;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod perturb;
pub mod rng;
pub mod saliency;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Image, SaliencyMap, Tensor};
