//! Baseline participant: bound propagation, input-splitting branch and bound,
//! a sampling/PGD falsifier, and counterexample validation.

mod bab;
mod bounds;
mod falsify;
mod witness;

use std::time::Duration;

use serde::Serialize;

pub use bab::verify;
pub use bounds::{affine_bounds, affine_bounds_refined, interval_bounds, AffineBounds, AffineFn};
pub use falsify::{constraint_gradient, falsify};
pub use witness::{format_witness, parse_witness, validate_witness, WitnessCheck};

use crate::network::{Activation, Network, NetworkError};
use crate::spec::{NormalizedSpec, SpecError, Witness};
use crate::Status;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("affine bounds support ReLU activations only, found {0:?}")]
    UnsupportedActivation(Activation),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("witness line {line}: {msg}")]
    WitnessFormat { line: usize, msg: String },
}

/// Resource limits and falsifier schedule for one verification call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub time_limit: Duration,
    pub max_subproblems: usize,
    /// Uniform samples drawn per disjunct box.
    pub samples: usize,
    pub pgd_restarts: usize,
    pub pgd_steps: usize,
    /// PGD step length as a fraction of each box dimension's width.
    pub step_fraction: f64,
    pub seed: u64,
}

impl Budget {
    /// Falsifier budget that decides whether a violated instance counts as
    /// easy: 100 samples, 3 restarts of 50 steps at 0.1 of the box width,
    /// within 10 s.
    pub fn easy() -> Self {
        Budget {
            time_limit: Duration::from_secs(10),
            max_subproblems: 1_000_000,
            samples: 100,
            pgd_restarts: 3,
            pgd_steps: 50,
            step_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.time_limit.is_zero() {
            return Err(VerifyError::InvalidBudget("time limit must be positive".into()));
        }
        if self.max_subproblems == 0 || self.samples == 0 || self.pgd_restarts == 0 || self.pgd_steps == 0 {
            return Err(VerifyError::InvalidBudget("counts must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction.is_finite()) {
            return Err(VerifyError::InvalidBudget(format!("step fraction {}", self.step_fraction)));
        }
        Ok(())
    }

    /// One-line description for report headers.
    pub fn describe(&self) -> String {
        format!(
            "{} samples + {} PGD restarts x {} steps (step {} of box width) within {} s, seed {}",
            self.samples,
            self.pgd_restarts,
            self.pgd_steps,
            self.step_fraction,
            self.time_limit.as_secs_f64(),
            self.seed
        )
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget { time_limit: Duration::from_secs(60), ..Budget::easy() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stats {
    pub subproblems: usize,
    pub seconds: f64,
}

/// Result of [`verify`]. A `Violated` outcome always carries a witness that
/// satisfies the specification exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub witness: Option<Witness>,
    pub stats: Stats,
    pub message: Option<String>,
}

impl Outcome {
    fn new(status: Status, stats: Stats) -> Self {
        Outcome { status, witness: None, stats, message: None }
    }
}

fn check_compatible(net: &Network, spec: &NormalizedSpec) -> Result<(), VerifyError> {
    if net.n_inputs != spec.n_inputs {
        return Err(VerifyError::DimensionMismatch { what: "inputs", expected: spec.n_inputs, got: net.n_inputs });
    }
    if net.n_outputs != spec.n_outputs {
        return Err(VerifyError::DimensionMismatch {
            what: "outputs",
            expected: spec.n_outputs,
            got: net.n_outputs,
        });
    }
    Ok(())
}
