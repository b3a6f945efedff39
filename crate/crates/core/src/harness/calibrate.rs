//! Perturbation-radius calibration for robustness properties.
//!
//! Two bisections over `[0, eps_max]`: the largest radius at which an attack
//! still fails, and the smallest radius at which certification fails. The
//! chosen radius sits two thirds of the way from the smaller to the larger.

use serde::Serialize;

use super::HarnessError;
use crate::network::{HyperBox, Network};
use crate::spec::{Conjunct, InputBox, LinearConstraint, NormalizedSpec};
use crate::verifier::{affine_bounds, falsify, Budget, VerifyError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRequest {
    pub eps_max: f64,
    pub eps_tol: f64,
}

impl CalibrationRequest {
    fn validate(&self) -> Result<(), HarnessError> {
        if !(self.eps_max > 0.0 && self.eps_max.is_finite()) {
            return Err(HarnessError::Calibration(format!("eps_max must be positive, got {}", self.eps_max)));
        }
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            return Err(HarnessError::Calibration(format!("eps_tol must be positive, got {}", self.eps_tol)));
        }
        Ok(())
    }

    /// Bisection steps after the initial probe at `eps_max`.
    pub fn steps(&self) -> usize {
        (self.eps_max / self.eps_tol).log2().ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub eps: f64,
    pub eps_lb: f64,
    pub eps_ub: f64,
    /// Largest radius where the attack failed.
    pub attack_radius: f64,
    /// Smallest radius where certification failed.
    pub certify_radius: f64,
    pub attack_calls: usize,
    pub certify_calls: usize,
}

/// `(lb + 2 ub) / 3` of the two radii; equal radii are returned unchanged.
pub fn combine_radii(a: f64, b: f64) -> f64 {
    let (lb, ub) = (a.min(b), a.max(b));
    if lb == ub {
        lb
    } else {
        (lb + 2.0 * ub) / 3.0
    }
}

/// Runs both searches. `attack(eps)` reports whether a counterexample was
/// found at radius `eps`; `certify(eps)` whether robustness was proved.
/// Each search makes at most `steps() + 1` oracle calls.
pub fn calibrate_epsilon<A, C, E>(req: &CalibrationRequest, mut attack: A, mut certify: C) -> Result<Calibration, E>
where
    A: FnMut(f64) -> Result<bool, E>,
    C: FnMut(f64) -> Result<bool, E>,
    E: From<HarnessError>,
{
    req.validate()?;
    let steps = req.steps();

    // Largest radius where the attack fails.
    let mut attack_calls = 1;
    let attack_radius = if !attack(req.eps_max)? {
        req.eps_max
    } else {
        let (mut lo, mut hi) = (0.0, req.eps_max);
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            attack_calls += 1;
            if attack(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };

    // Smallest radius where certification fails.
    let mut certify_calls = 1;
    let certify_radius = if certify(req.eps_max)? {
        req.eps_max
    } else {
        let (mut lo, mut hi) = (0.0, req.eps_max);
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            certify_calls += 1;
            if certify(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };

    Ok(Calibration {
        eps: combine_radii(attack_radius, certify_radius),
        eps_lb: attack_radius.min(certify_radius),
        eps_ub: attack_radius.max(certify_radius),
        attack_radius,
        certify_radius,
        attack_calls,
        certify_calls,
    })
}

/// Counterexample spec for local robustness: some input within `eps`
/// (infinity norm) of `center` makes output `j` at least output `label`,
/// for some `j != label`.
pub fn robustness_spec(center: &[f64], label: usize, eps: f64, n_outputs: usize) -> NormalizedSpec {
    let input_box = InputBox {
        lower: center.iter().map(|c| c - eps).collect(),
        upper: center.iter().map(|c| c + eps).collect(),
    };
    let disjuncts = (0..n_outputs)
        .filter(|&j| j != label)
        .map(|j| {
            let mut y = vec![0.0; n_outputs];
            // y_label - y_j <= 0
            y[label] = 1.0;
            y[j] = -1.0;
            Conjunct {
                input_box: input_box.clone(),
                constraints: vec![LinearConstraint { x_coeffs: vec![0.0; center.len()], y_coeffs: y, constant: 0.0 }],
            }
        })
        .collect();
    NormalizedSpec { n_inputs: center.len(), n_outputs, disjuncts }
}

/// Index of the largest output at `center`.
fn predicted(net: &Network, center: &[f64]) -> Result<usize, VerifyError> {
    let y = net.forward(center)?;
    Ok(y.iter().enumerate().fold(0, |best, (i, v)| if *v > y[best] { i } else { best }))
}

/// Attack oracle backed by the falsifier.
pub fn attack_oracle<'a>(
    net: &'a Network,
    center: &'a [f64],
    budget: &'a Budget,
) -> impl FnMut(f64) -> Result<bool, HarnessError> + 'a {
    move |eps| {
        let label = predicted(net, center)?;
        let spec = robustness_spec(center, label, eps, net.n_outputs);
        Ok(falsify(net, &spec, budget)?.is_some())
    }
}

/// Certification oracle backed by a single pass of affine bounds: proved
/// when every other output's margin over the predicted one is bounded
/// below zero.
pub fn certify_oracle<'a>(net: &'a Network, center: &'a [f64]) -> impl FnMut(f64) -> Result<bool, HarnessError> + 'a {
    move |eps| {
        let label = predicted(net, center)?;
        let b = HyperBox {
            lower: center.iter().map(|c| c - eps).collect(),
            upper: center.iter().map(|c| c + eps).collect(),
        };
        let bounds = affine_bounds(net, &b)?;
        let zeros = vec![0.0; center.len()];
        let proved = (0..net.n_outputs).filter(|&j| j != label).all(|j| {
            let mut alpha = vec![0.0; net.n_outputs];
            alpha[j] = 1.0;
            alpha[label] = -1.0;
            bounds.linear_range(&alpha, &zeros, 0.0).1 < 0.0
        });
        Ok(proved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_examples() {
        assert_eq!(combine_radii(0.01, 0.04), 0.03);
        assert_eq!(combine_radii(0.04, 0.01), 0.03);
        assert_eq!(combine_radii(0.2, 0.2), 0.2);
    }

    #[test]
    fn threshold_oracles() {
        let req = CalibrationRequest { eps_max: 16.0 / 255.0, eps_tol: 1e-4 };
        let c = calibrate_epsilon::<_, _, HarnessError>(&req, |e| Ok(e > 0.04), |e| Ok(e <= 0.01)).unwrap();
        assert!((c.attack_radius - 0.04).abs() <= req.eps_tol);
        assert!((c.certify_radius - 0.01).abs() <= req.eps_tol);
        assert!(c.eps_lb <= c.eps && c.eps <= c.eps_ub);
        assert!(c.attack_calls <= req.steps() + 1);
        assert!(c.certify_calls <= req.steps() + 1);
    }

    #[test]
    fn never_found_or_always_proved() {
        let req = CalibrationRequest { eps_max: 0.5, eps_tol: 0.01 };
        let c = calibrate_epsilon::<_, _, HarnessError>(&req, |_| Ok(false), |_| Ok(true)).unwrap();
        assert_eq!((c.attack_radius, c.certify_radius, c.eps), (0.5, 0.5, 0.5));
        assert_eq!((c.attack_calls, c.certify_calls), (1, 1));
        let bad = CalibrationRequest { eps_max: 0.5, eps_tol: 0.0 };
        assert!(calibrate_epsilon::<_, _, HarnessError>(&bad, |_| Ok(false), |_| Ok(true)).is_err());
    }

    #[test]
    fn oracle_errors_propagate() {
        let req = CalibrationRequest { eps_max: 1.0, eps_tol: 0.1 };
        let r = calibrate_epsilon(&req, |_| Err(HarnessError::Calibration("boom".into())), |_| Ok(true));
        assert!(r.is_err());
    }
}
