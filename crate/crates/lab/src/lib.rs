//! Command-line experiments on top of `gibbs-core`.
//!
//! Every run writes `resolved_config.toml`, `summary.json` and the
//! experiment's own tables into its output directory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use serde_json::Value;

pub use config::{Experiment, Overrides};
pub use error::{LabError, LabResult};

use config::{load, Parameters, Resolved};
use output::{Sink, RESOLVED_CONFIG};

pub const SUMMARY: &str = "summary.json";

#[derive(Debug)]
pub struct Report {
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
    pub seed: u64,
}

fn execute<P: Parameters>(
    experiment: Experiment,
    text: Option<&str>,
    overrides: &Overrides,
    body: fn(&Resolved<P>, &mut Sink) -> LabResult<Value>,
) -> LabResult<Report> {
    let resolved = load::<P>(experiment, text, overrides)?;
    let mut sink = Sink::create(&resolved.output_dir)?;
    sink.toml(RESOLVED_CONFIG, &resolved)?;
    let summary = body(&resolved, &mut sink)?;
    sink.json(SUMMARY, &summary)?;
    Ok(Report {
        summary,
        artifacts: sink.artifacts,
        seed: resolved.seed,
    })
}

/// Runs one experiment; `config_text` is the contents of an optional TOML file.
pub fn run(
    experiment: Experiment,
    config_text: Option<&str>,
    overrides: &Overrides,
) -> LabResult<Report> {
    use experiments as e;
    let (t, o) = (config_text, overrides);
    match experiment {
        Experiment::MixReversible => execute(experiment, t, o, e::mix_reversible),
        Experiment::Unmix => execute(experiment, t, o, e::unmix),
        Experiment::MixIrreversible => execute(experiment, t, o, e::mix_irreversible),
        Experiment::CountSweep => execute(experiment, t, o, e::count_sweep),
        Experiment::StatisticsSweep => execute(experiment, t, o, e::statistics_sweep),
        Experiment::Ehrenfest => execute(experiment, t, o, e::ehrenfest),
        Experiment::Decompose => execute(experiment, t, o, e::decompose),
        Experiment::Orthogonality => execute(experiment, t, o, e::orthogonality),
    }
}
