//! Witness files and validation.
//!
//! A witness file lists `X_<i> <value>` for every input in index order, then
//! optionally `Y_<j> <value>` for every output, one per line, with values
//! printed to 17 significant digits so they round-trip exactly.

use crate::network::Network;
use crate::spec::{NormalizedSpec, Tolerance, Var, VarKind, Witness};
use crate::format_g17;

use super::VerifyError;

pub fn format_witness(x: &[f64], y: Option<&[f64]>) -> String {
    let mut s = String::new();
    for (i, v) in x.iter().enumerate() {
        s.push_str(&format!("X_{i} {}\n", format_g17(*v)));
    }
    for (j, v) in y.unwrap_or_default().iter().enumerate() {
        s.push_str(&format!("Y_{j} {}\n", format_g17(*v)));
    }
    s
}

/// Parses a witness file. Blank lines are skipped and surrounding
/// parentheses tolerated (`(X_0 0.5)`), so the s-expression style some tools
/// emit is accepted too.
pub fn parse_witness(text: &str) -> Result<Witness, VerifyError> {
    let mut xs: Vec<Option<f64>> = Vec::new();
    let mut ys: Vec<Option<f64>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_matches(|c| c == '(' || c == ')').trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| VerifyError::WitnessFormat { line: n + 1, msg };
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `<variable> <value>`, got {raw:?}")));
        };
        let var = Var::from_name(name).ok_or_else(|| err(format!("unknown variable {name:?}")))?;
        let value: f64 = value.parse().map_err(|_| err(format!("bad number {value:?}")))?;
        let slot = match var.kind {
            VarKind::Input => &mut xs,
            VarKind::Output => &mut ys,
        };
        if slot.len() <= var.index {
            slot.resize(var.index + 1, None);
        }
        if slot[var.index].replace(value).is_some() {
            return Err(err(format!("{name} given twice")));
        }
    }
    let dense = |v: Vec<Option<f64>>, prefix: &str| -> Result<Vec<f64>, VerifyError> {
        v.iter()
            .enumerate()
            .map(|(i, o)| o.ok_or_else(|| VerifyError::WitnessFormat { line: 0, msg: format!("{prefix}_{i} missing") }))
            .collect()
    };
    let x = dense(xs, "X")?;
    if x.is_empty() {
        return Err(VerifyError::WitnessFormat { line: 0, msg: "no input values".into() });
    }
    let y = dense(ys, "Y")?;
    Ok(Witness { x, y_claimed: (!y.is_empty()).then_some(y) })
}

/// Result of [`validate_witness`].
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub valid: bool,
    /// Outputs recomputed by the network.
    pub outputs: Vec<f64>,
    pub diagnostic: Option<String>,
}

/// Recomputes the network output at `w.x` and checks the specification with
/// tolerance `tol`. Claimed outputs, if present, must agree with the
/// recomputed ones within the same tolerance.
pub fn validate_witness(
    net: &Network,
    spec: &NormalizedSpec,
    w: &Witness,
    tol: Tolerance,
) -> Result<WitnessCheck, VerifyError> {
    if w.x.len() != spec.n_inputs {
        return Err(VerifyError::DimensionMismatch { what: "witness inputs", expected: spec.n_inputs, got: w.x.len() });
    }
    let y = net.forward(&w.x)?;
    if let Some(claimed) = &w.y_claimed {
        if claimed.len() != y.len() {
            return Ok(WitnessCheck {
                valid: false,
                outputs: y.clone(),
                diagnostic: Some(format!(
                    "claimed-output mismatch: {} values claimed, network has {} outputs",
                    claimed.len(),
                    y.len()
                )),
            });
        }
        for (j, (c, v)) in claimed.iter().zip(&y).enumerate() {
            // Negated so a NaN difference is a mismatch.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !((c - v).abs() <= tol.slack(c.abs().max(v.abs()))) {
                return Ok(WitnessCheck {
                    valid: false,
                    outputs: y.clone(),
                    diagnostic: Some(format!(
                        "claimed-output mismatch at Y_{j}: claimed {}, computed {}",
                        format_g17(*c),
                        format_g17(*v)
                    )),
                });
            }
        }
    }
    let valid = spec.eval(&w.x, &y, tol)?;
    let diagnostic = (!valid).then(|| "point does not satisfy any disjunct of the specification".to_string());
    Ok(WitnessCheck { valid, outputs: y, diagnostic })
}
