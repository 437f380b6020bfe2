//! Config-driven batch runner for the backlight toolkit.
//!
//! An experiment is one TOML file: a kind, a parameter block, and optional
//! sweep axes that fan the block out into a job list. Jobs run in a worker
//! pool, are cached by content hash, and land as CSV/SVG artifacts plus a
//! manifest that records what was produced and from which inputs.

pub mod cache;
pub mod config;
pub mod experiments;
pub mod fit;
pub mod manifest;
pub mod runner;
pub mod svg;
pub mod tables;

/// Version stamped into job hashes and manifests; bumping it invalidates
/// every cache entry, which is exactly right when the solvers change.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the default `<output_dir>/.cache`
/// location, so separate runs can share one cache.
pub const CACHE_DIR_ENV: &str = "BACKLIGHT_CACHE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Anything wrong with the config file itself; exits with code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Filesystem trouble while producing artifacts; exits with code 1.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
