//! File formats, configuration and commands around `hyperinr-core`.

pub mod bundle;
pub mod commands;
pub mod config;
mod container;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fsutil;
pub mod latents;
pub mod report;
pub mod udfcache;
pub mod xyz;

pub use error::{CliError, Result};
