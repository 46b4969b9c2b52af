//! Files, checkpoints, parallel evaluation and the ablation runner around
//! [`pal_core`]. The `pal` binary exposes all of it on the command line.

mod bytes;

pub mod ablation;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod features;
pub mod parallel;
pub mod records;

pub use error::{PalError, Result};
