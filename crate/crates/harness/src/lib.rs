//! Experiment runner for `adagrad-core`: TOML suites, built-in presets,
//! bound and rate checks, CSV traces and SVG plots.

pub mod config;
pub mod error;
pub mod presets;
pub mod suite;
pub mod svg;

pub use config::{Check, ExperimentConfig, PropertyCheck};
pub use error::HarnessError;
pub use suite::{evaluate_suite, run_suite, write_artifacts, SuiteOutcome, SuiteStatus};

/// Environment variable that overrides the artifact root directory.
pub const OUTPUT_ROOT_ENV: &str = "ADANORM_OUTPUT_ROOT";
/// Artifact root used when the environment variable is unset.
pub const DEFAULT_OUTPUT_ROOT: &str = "results";

/// Artifact root: the environment override if set and nonempty, else `results`.
pub fn output_root() -> std::path::PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => v.into(),
        _ => DEFAULT_OUTPUT_ROOT.into(),
    }
}
