//! The `hlab` experiment runner: configuration, artifact files and the
//! manifest, on top of `hlab-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod failure;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind, Overrides, Resolved};
pub use failure::{Failure, EXIT_CONFIG, EXIT_SOLVER};

/// What a successful run produced.
#[derive(Debug)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Vec<String>,
    /// The output directory held a manifest for the same configuration and
    /// every artifact reproduced its recorded hash.
    pub verified: bool,
}

/// Resolve a configuration (from `config_path`, or all defaults), run the
/// experiment and write its artifacts.
pub fn run(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunReport, Failure> {
    let cfg = match config_path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    run_config(cfg, overrides)
}

pub fn run_config(cfg: ExperimentConfig, overrides: &Overrides) -> Result<RunReport, Failure> {
    let resolved = cfg.resolve(overrides)?;
    let start = Instant::now();
    let outcome = experiments::run_experiment(&resolved)?;
    let info = artifacts::RunInfo {
        experiment: resolved.kind.name(),
        seed: resolved.seed(),
        config: &resolved.canonical,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let verified = artifacts::commit(&outcome.artifacts, &resolved.out_dir, &info)?;
    Ok(RunReport {
        kind: resolved.kind,
        out_dir: resolved.out_dir,
        files: outcome.artifacts.names().map(str::to_string).collect(),
        summary: outcome.summary,
        verified,
    })
}
