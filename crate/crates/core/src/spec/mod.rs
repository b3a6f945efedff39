//! VNNLIB specifications.
//!
//! A specification encodes a *counterexample*: the property holds when the
//! specification is unsatisfiable over the network, and is violated when some
//! input/output pair satisfies it. Parsing produces a [`SpecAst`]; [`to_dnf`]
//! distributes it into a [`NormalizedSpec`] whose disjuncts each carry an input
//! box plus residual linear constraints.

mod ast;
mod normalize;
mod parse;

pub use ast::{AffineExpr, Atom, Relation, SpecAst, Term, Var, VarKind};
pub use normalize::{to_dnf, Conjunct, DnfOptions, InputBox, LinearConstraint, NormalizedSpec};
pub use parse::parse_vnnlib;

use serde::{Deserialize, Serialize};

/// Largest number of disjuncts [`to_dnf`] produces before giving up.
pub const DEFAULT_MAX_DISJUNCTS: usize = 4096;

/// Magnitude substituted for a missing input bound when unbounded inputs are
/// explicitly allowed.
pub const UNBOUNDED_SUBSTITUTE: f64 = 1e30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared variable {name} at {line}:{col}")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("non-affine term at {line}:{col}: {construct}")]
    NonAffine { construct: String, line: usize, col: usize },
    #[error("unsupported construct at {line}:{col}: {construct}")]
    Unsupported { construct: String, line: usize, col: usize },
    #[error("variable {name} declared twice (line {line})")]
    DuplicateDeclaration { name: String, line: usize },
    #[error("variable indices are not dense: {name} is missing")]
    NonDenseIndices { name: String },
    #[error("specification too disjunctive: more than {cap} disjuncts")]
    TooDisjunctive { cap: usize },
    #[error("input X_{index} is unbounded in disjunct {disjunct}")]
    UnboundedInput { disjunct: usize, index: usize },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
}

/// Slack allowed when checking an inequality: `a <= b` is accepted when
/// `a <= b + max(abs, rel * magnitude)`, where `magnitude` is the size of the
/// terms involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance { abs: 0.0, rel: 0.0 };

    /// Witness validation default: relative 1e-6 with an absolute floor of 1e-9.
    pub const WITNESS: Tolerance = Tolerance { abs: 1e-9, rel: 1e-6 };

    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn slack(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::EXACT
    }
}

/// A candidate counterexample: network inputs and, optionally, the outputs
/// the producing tool claims the network computes there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y_claimed: Option<Vec<f64>>,
}

impl Witness {
    pub fn new(x: Vec<f64>) -> Self {
        Witness { x, y_claimed: None }
    }

    pub fn with_outputs(x: Vec<f64>, y: Vec<f64>) -> Self {
        Witness { x, y_claimed: Some(y) }
    }
}

/// `eval_spec`: true iff `(x, y)` satisfies some disjunct, every inequality
/// slackened by the absolute tolerance `tol`.
pub fn eval_spec(spec: &NormalizedSpec, x: &[f64], y: &[f64], tol: f64) -> Result<bool, SpecError> {
    spec.eval(x, y, Tolerance::absolute(tol))
}
