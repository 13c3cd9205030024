//! File formats and the command-line front end for `mlbs-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod netpbm;
pub mod scene;
pub mod sequence;
pub mod tracks;

pub use error::{Error, Result};
