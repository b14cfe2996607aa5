//! File and command-line layer over `fluxread-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod svg;

pub use config::Config;
pub use error::{CliError, Result};

/// Worker-count override for the thread pool.
pub const WORKERS_ENV: &str = "FLUXREAD_WORKERS";
