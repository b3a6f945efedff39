use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{SpecError, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarKind {
    Input,
    Output,
}

/// `X_i` (input) or `Y_j` (output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    pub fn input(index: usize) -> Self {
        Var { kind: VarKind::Input, index }
    }

    pub fn output(index: usize) -> Self {
        Var { kind: VarKind::Output, index }
    }

    /// Recognizes `X_<n>` and `Y_<n>`.
    pub fn from_name(name: &str) -> Option<Self> {
        let (kind, digits) = match name.strip_prefix("X_") {
            Some(d) => (VarKind::Input, d),
            None => (VarKind::Output, name.strip_prefix("Y_")?),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok().map(|index| Var { kind, index })
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            VarKind::Input => x[self.index],
            VarKind::Output => y[self.index],
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Input => write!(f, "X_{}", self.index),
            VarKind::Output => write!(f, "Y_{}", self.index),
        }
    }
}

/// `sum(coeff * var) + constant`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AffineExpr {
    pub terms: BTreeMap<Var, f64>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(v, 1.0);
        AffineExpr { terms, constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(mut self, k: f64) -> Self {
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn add(mut self, other: &AffineExpr) -> Self {
        for (v, c) in &other.terms {
            *self.terms.entry(*v).or_insert(0.0) += c;
        }
        self.constant += other.constant;
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn sub(self, other: &AffineExpr) -> Self {
        self.add(&other.clone().scale(-1.0))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (v, c) in &self.terms {
            acc += c * v.value(x, y);
        }
        acc + self.constant
    }

    /// Sum of absolute term values at the point, used to scale relative
    /// tolerances.
    pub fn magnitude(&self, x: &[f64], y: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| (c * v.value(x, y)).abs()).sum::<f64>() + self.constant.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
}

/// `lhs <= rhs` or `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub relation: Relation,
    pub lhs: AffineExpr,
    pub rhs: AffineExpr,
}

impl Atom {
    /// The atom rewritten as `expr <= 0`.
    pub fn as_le_zero(&self) -> AffineExpr {
        match self.relation {
            Relation::Le => self.lhs.clone().sub(&self.rhs),
            Relation::Ge => self.rhs.clone().sub(&self.lhs),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64], tol: Tolerance) -> bool {
        let e = self.as_le_zero();
        e.eval(x, y) <= tol.slack(e.magnitude(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Term {
    Atom(Atom),
    And(Vec<Term>),
    Or(Vec<Term>),
}

impl Term {
    pub fn eval(&self, x: &[f64], y: &[f64], tol: Tolerance) -> bool {
        match self {
            Term::Atom(a) => a.eval(x, y, tol),
            Term::And(ts) => ts.iter().all(|t| t.eval(x, y, tol)),
            Term::Or(ts) => ts.iter().any(|t| t.eval(x, y, tol)),
        }
    }
}

/// Parsed specification: declarations in source order and the top-level
/// assertions, which are implicitly conjoined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecAst {
    pub declarations: Vec<Var>,
    pub assertions: Vec<Term>,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Non-fatal diagnostics, e.g. strict comparisons read as non-strict.
    pub warnings: Vec<String>,
}

impl SpecAst {
    pub fn eval(&self, x: &[f64], y: &[f64], tol: Tolerance) -> Result<bool, SpecError> {
        check_dims(self.n_inputs, self.n_outputs, x, y)?;
        Ok(self.assertions.iter().all(|t| t.eval(x, y, tol)))
    }
}

pub(crate) fn check_dims(n_in: usize, n_out: usize, x: &[f64], y: &[f64]) -> Result<(), SpecError> {
    if x.len() != n_in {
        return Err(SpecError::DimensionMismatch { what: "input vector", expected: n_in, got: x.len() });
    }
    if y.len() != n_out {
        return Err(SpecError::DimensionMismatch { what: "output vector", expected: n_out, got: y.len() });
    }
    Ok(())
}
