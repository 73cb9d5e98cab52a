//! File formats, the scoring-bridge client, significance tests and the
//! experiment pipeline behind the `relbench` command.

mod error;

pub mod bridge;
pub mod checkpoint;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod significance;
pub mod tnsr;

pub use error::{Error, Result, StageExt};
