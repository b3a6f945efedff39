use serde::Serialize;

use super::ast::{check_dims, Atom, SpecAst, Term, VarKind};
use super::{SpecError, Tolerance, DEFAULT_MAX_DISJUNCTS, UNBOUNDED_SUBSTITUTE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnfOptions {
    pub max_disjuncts: usize,
    /// Substitute `±1e30` for missing input bounds instead of failing.
    pub allow_unbounded: bool,
}

impl Default for DnfOptions {
    fn default() -> Self {
        DnfOptions { max_disjuncts: DEFAULT_MAX_DISJUNCTS, allow_unbounded: false }
    }
}

/// Per-input lower/upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBox {
    pub fn contains(&self, x: &[f64], tol: Tolerance) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((&v, &lo), &hi)| {
            v >= lo - tol.slack(lo.abs().max(v.abs())) && v <= hi + tol.slack(hi.abs().max(v.abs()))
        })
    }
}

/// `x_coeffs·x + y_coeffs·y + constant <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub x_coeffs: Vec<f64>,
    pub y_coeffs: Vec<f64>,
    pub constant: f64,
}

impl LinearConstraint {
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, v) in self.x_coeffs.iter().zip(x) {
            acc += c * v;
        }
        for (c, v) in self.y_coeffs.iter().zip(y) {
            acc += c * v;
        }
        acc + self.constant
    }

    fn magnitude(&self, x: &[f64], y: &[f64]) -> f64 {
        let xs: f64 = self.x_coeffs.iter().zip(x).map(|(c, v)| (c * v).abs()).sum();
        let ys: f64 = self.y_coeffs.iter().zip(y).map(|(c, v)| (c * v).abs()).sum();
        xs + ys + self.constant.abs()
    }

    pub fn holds(&self, x: &[f64], y: &[f64], tol: Tolerance) -> bool {
        self.value(x, y) <= tol.slack(self.magnitude(x, y))
    }

    pub fn involves_outputs(&self) -> bool {
        self.y_coeffs.iter().any(|&c| c != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conjunct {
    pub input_box: InputBox,
    pub constraints: Vec<LinearConstraint>,
}

impl Conjunct {
    pub fn holds(&self, x: &[f64], y: &[f64], tol: Tolerance) -> bool {
        self.input_box.contains(x, tol) && self.constraints.iter().all(|c| c.holds(x, y, tol))
    }
}

/// Disjunctive normal form of a specification. A point satisfies the
/// specification iff it satisfies at least one disjunct.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedSpec {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub disjuncts: Vec<Conjunct>,
}

impl NormalizedSpec {
    pub fn eval(&self, x: &[f64], y: &[f64], tol: Tolerance) -> Result<bool, SpecError> {
        check_dims(self.n_inputs, self.n_outputs, x, y)?;
        Ok(self.disjuncts.iter().any(|c| c.holds(x, y, tol)))
    }

    /// Index of the first satisfied disjunct.
    pub fn satisfied_disjunct(&self, x: &[f64], y: &[f64], tol: Tolerance) -> Result<Option<usize>, SpecError> {
        check_dims(self.n_inputs, self.n_outputs, x, y)?;
        Ok(self.disjuncts.iter().position(|c| c.holds(x, y, tol)))
    }

    /// Deterministic JSON dump used by the `parse` command.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("normalized specs always serialize")
    }
}

/// Distributes the conjunction of assertions into DNF, folds single-variable
/// input atoms into per-disjunct boxes (tightest bound wins) and keeps the
/// rest as linear constraints. Disjuncts with an empty box or a constant-false
/// atom are dropped.
pub fn to_dnf(ast: &SpecAst, opts: &DnfOptions) -> Result<NormalizedSpec, SpecError> {
    let root = Term::And(ast.assertions.clone());
    let raw = distribute(&root, opts.max_disjuncts)?;
    let mut disjuncts = Vec::with_capacity(raw.len());
    for atoms in raw {
        if let Some(c) = fold(ast.n_inputs, ast.n_outputs, &atoms) {
            disjuncts.push(c);
        }
    }
    for (d, c) in disjuncts.iter_mut().enumerate() {
        for i in 0..ast.n_inputs {
            let lo = &mut c.input_box.lower[i];
            let hi = &mut c.input_box.upper[i];
            if lo.is_infinite() || hi.is_infinite() {
                if !opts.allow_unbounded {
                    return Err(SpecError::UnboundedInput { disjunct: d, index: i });
                }
                if lo.is_infinite() {
                    *lo = -UNBOUNDED_SUBSTITUTE;
                }
                if hi.is_infinite() {
                    *hi = UNBOUNDED_SUBSTITUTE;
                }
            }
        }
    }
    Ok(NormalizedSpec { n_inputs: ast.n_inputs, n_outputs: ast.n_outputs, disjuncts })
}

fn distribute(t: &Term, cap: usize) -> Result<Vec<Vec<&Atom>>, SpecError> {
    match t {
        Term::Atom(a) => Ok(vec![vec![a]]),
        Term::Or(children) => {
            let mut out = Vec::new();
            for c in children {
                out.extend(distribute(c, cap)?);
                if out.len() > cap {
                    return Err(SpecError::TooDisjunctive { cap });
                }
            }
            Ok(out)
        }
        Term::And(children) => {
            let mut acc: Vec<Vec<&Atom>> = vec![Vec::new()];
            for c in children {
                let rhs = distribute(c, cap)?;
                if acc.len().saturating_mul(rhs.len()) > cap {
                    return Err(SpecError::TooDisjunctive { cap });
                }
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for left in &acc {
                    for right in &rhs {
                        let mut merged = left.clone();
                        merged.extend(right.iter().copied());
                        next.push(merged);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

fn fold(n_in: usize, n_out: usize, atoms: &[&Atom]) -> Option<Conjunct> {
    let mut lower = vec![f64::NEG_INFINITY; n_in];
    let mut upper = vec![f64::INFINITY; n_in];
    let mut constraints = Vec::new();
    for atom in atoms {
        let e = atom.as_le_zero();
        if e.is_constant() {
            if e.constant <= 0.0 {
                continue;
            }
            return None;
        }
        let only_inputs = e.terms.keys().all(|v| v.kind == VarKind::Input);
        if only_inputs && e.terms.len() == 1 {
            let (v, &c) = e.terms.iter().next().expect("one term");
            // c*x + k <= 0
            let bound = -e.constant / c;
            if c > 0.0 {
                upper[v.index] = upper[v.index].min(bound);
            } else {
                lower[v.index] = lower[v.index].max(bound);
            }
            continue;
        }
        let mut lc = LinearConstraint {
            x_coeffs: vec![0.0; n_in],
            y_coeffs: vec![0.0; n_out],
            constant: e.constant,
        };
        for (v, &c) in &e.terms {
            match v.kind {
                VarKind::Input => lc.x_coeffs[v.index] += c,
                VarKind::Output => lc.y_coeffs[v.index] += c,
            }
        }
        constraints.push(lc);
    }
    if lower.iter().zip(&upper).any(|(lo, hi)| lo > hi) {
        return None;
    }
    Some(Conjunct { input_box: InputBox { lower, upper }, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{eval_spec, parse_vnnlib};

    fn normalize(text: &str) -> Result<NormalizedSpec, SpecError> {
        to_dnf(&parse_vnnlib(text).unwrap(), &DnfOptions::default())
    }

    const HEADER: &str = "(declare-const X_0 Real)(declare-const Y_0 Real)(declare-const Y_1 Real)";

    #[test]
    fn no_disjunction_single_conjunct() {
        let spec = normalize(&format!(
            "{HEADER}(assert (>= X_0 0))(assert (<= X_0 1))(assert (>= Y_0 2))"
        ))
        .unwrap();
        assert_eq!(spec.disjuncts.len(), 1);
        let c = &spec.disjuncts[0];
        assert_eq!(c.input_box.lower, vec![0.0]);
        assert_eq!(c.input_box.upper, vec![1.0]);
        assert_eq!(c.constraints.len(), 1);
        assert_eq!(c.constraints[0].y_coeffs, vec![-1.0, 0.0]);
        assert_eq!(c.constraints[0].constant, 2.0);
    }

    #[test]
    fn disjunction_over_outputs_without_box_is_an_error() {
        let err = normalize(&format!("{HEADER}(assert (or (>= Y_0 1) (>= Y_1 1)))")).unwrap_err();
        assert_eq!(err, SpecError::UnboundedInput { disjunct: 0, index: 0 });
    }

    #[test]
    fn disjunction_distributes_box_to_each_conjunct() {
        let spec = normalize(&format!(
            "{HEADER}(assert (>= X_0 -1))(assert (<= X_0 1))(assert (or (>= Y_0 1) (>= Y_1 1)))"
        ))
        .unwrap();
        assert_eq!(spec.disjuncts.len(), 2);
        for c in &spec.disjuncts {
            assert_eq!(c.input_box.lower, vec![-1.0]);
            assert_eq!(c.input_box.upper, vec![1.0]);
            assert_eq!(c.constraints.len(), 1);
        }
        assert_eq!(spec.disjuncts[0].constraints[0].y_coeffs, vec![-1.0, 0.0]);
        assert_eq!(spec.disjuncts[1].constraints[0].y_coeffs, vec![0.0, -1.0]);
    }

    #[test]
    fn unbounded_allowed_substitutes_large_box() {
        let ast = parse_vnnlib(&format!("{HEADER}(assert (>= X_0 0))(assert (>= Y_0 1))")).unwrap();
        let spec = to_dnf(&ast, &DnfOptions { allow_unbounded: true, ..Default::default() }).unwrap();
        assert_eq!(spec.disjuncts[0].input_box.lower, vec![0.0]);
        assert_eq!(spec.disjuncts[0].input_box.upper, vec![UNBOUNDED_SUBSTITUTE]);
    }

    #[test]
    fn tightest_bound_wins_and_empty_boxes_drop() {
        let spec = normalize(&format!(
            "{HEADER}(assert (>= X_0 0))(assert (>= X_0 0.25))(assert (<= X_0 1))(assert (<= (* 2 X_0) 1.5))\
             (assert (or (and (>= X_0 0.9) (>= Y_0 0)) (>= Y_1 0)))"
        ))
        .unwrap();
        // The first disjunct needs X_0 >= 0.9 but the box tops out at 0.75.
        assert_eq!(spec.disjuncts.len(), 1);
        assert_eq!(spec.disjuncts[0].input_box.lower, vec![0.25]);
        assert_eq!(spec.disjuncts[0].input_box.upper, vec![0.75]);
    }

    #[test]
    fn constant_atoms_fold() {
        let spec = normalize(&format!(
            "{HEADER}(assert (>= X_0 0))(assert (<= X_0 1))(assert (or (<= 1 0) (<= 0 1)))"
        ))
        .unwrap();
        assert_eq!(spec.disjuncts.len(), 1);
        assert!(spec.disjuncts[0].constraints.is_empty());
    }

    #[test]
    fn blow_up_guard() {
        let mut text = String::from("(declare-const X_0 Real)(declare-const Y_0 Real)(assert (>= X_0 0))(assert (<= X_0 1))");
        for _ in 0..13 {
            text.push_str("(assert (or (>= Y_0 1) (<= Y_0 -1)))");
        }
        let err = normalize(&text).unwrap_err();
        assert!(err.to_string().contains("specification too disjunctive"));
        let ok = to_dnf(
            &parse_vnnlib(&text).unwrap(),
            &DnfOptions { max_disjuncts: 1 << 13, ..Default::default() },
        )
        .unwrap();
        assert_eq!(ok.disjuncts.len(), 1 << 13);
    }

    #[test]
    fn non_box_input_constraints_stay_mixed() {
        let spec = normalize(
            "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
             (assert (>= X_0 0))(assert (<= X_0 1))(assert (>= X_1 0))(assert (<= X_1 1))\
             (assert (<= (+ X_0 X_1) 1))(assert (>= Y_0 X_0))",
        )
        .unwrap();
        let c = &spec.disjuncts[0];
        assert_eq!(c.constraints.len(), 2);
        assert!(!c.constraints[0].involves_outputs());
        assert!(c.constraints[1].involves_outputs());
    }

    #[test]
    fn eval_examples() {
        let spec = normalize("(declare-const X_0 Real)(declare-const Y_0 Real)(assert (>= X_0 0))(assert (<= X_0 1))(assert (>= Y_0 2))").unwrap();
        assert!(eval_spec(&spec, &[0.5], &[2.0], 0.0).unwrap());
        assert!(!eval_spec(&spec, &[0.5], &[1.999999], 0.0).unwrap());
        assert!(eval_spec(&spec, &[0.5], &[1.999999], 1e-6).unwrap());
        assert!(!eval_spec(&spec, &[1.5], &[3.0], 0.0).unwrap());
        assert!(matches!(
            eval_spec(&spec, &[0.5, 0.1], &[3.0], 0.0).unwrap_err(),
            SpecError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn dump_is_deterministic() {
        let text = format!("{HEADER}(assert (>= X_0 -1))(assert (<= X_0 1))(assert (or (>= Y_0 Y_1) (>= Y_1 0.1)))");
        assert_eq!(normalize(&text).unwrap().to_json(), normalize(&text).unwrap().to_json());
    }
}
