//! Orchestration: manifests, configuration, running tools under timeouts,
//! the built-in baseline participant, overhead runs, radius calibration and
//! report emission.

mod baseline;
mod calibrate;
mod config;
mod manifest;
mod overhead_run;
mod runner;

use std::path::{Path, PathBuf};

pub use baseline::run_baseline;
pub use calibrate::{
    attack_oracle, calibrate_epsilon, certify_oracle, combine_radii, robustness_spec, Calibration, CalibrationRequest,
};
pub use config::Config;
pub use manifest::{load_manifest, manifest_to_csv, Instance, Manifest, MAX_BENCHMARK_SECONDS};
pub use overhead_run::{measure_overhead_run, trivial_instances};
pub use runner::{run_all, run_tool, validated_witnesses, Participant, RunContext, RunOutcome, ToolAdapter};

use crate::network::NetworkError;
use crate::scoring::{render_report, ScoreLedger, ScoringError};
use crate::spec::SpecError;
use crate::verifier::VerifyError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {msg}")]
    Manifest { path: PathBuf, line: usize, msg: String },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("adapter {tool}: {msg}")]
    Adapter { tool: String, msg: String },
    #[error("invalid calibration request: {0}")]
    Calibration(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Writes the rendered report files into `out_dir`, creating it if needed.
pub fn emit_report(ledger: &ScoreLedger, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for f in render_report(ledger) {
        let path = out_dir.join(&f.name);
        std::fs::write(&path, f.contents).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
