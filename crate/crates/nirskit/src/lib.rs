//! File formats, pipeline runner and command line for `nirskit-core`.

pub mod config;
pub mod container;
pub mod error;
pub mod fixture;
pub mod forward;
pub mod registry;
pub mod reports;
pub mod runner;
pub mod simulate;
pub mod stim_csv;

pub use error::{Error, Result};
