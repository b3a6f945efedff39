//! Counterexample search: uniform sampling, then sign-gradient ascent on the
//! smallest constraint slack.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{HyperBox, Network};
use crate::spec::{Conjunct, NormalizedSpec, Tolerance, Witness};

use super::{check_compatible, Budget, VerifyError};

/// Searches for an input whose output satisfies `spec`. Returns the first
/// point that satisfies some disjunct exactly (zero tolerance). Deterministic
/// for a fixed `budget.seed`.
pub fn falsify(net: &Network, spec: &NormalizedSpec, budget: &Budget) -> Result<Option<Witness>, VerifyError> {
    check_compatible(net, spec)?;
    budget.validate()?;
    let deadline = Instant::now() + budget.time_limit;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);

    // The best samples per disjunct, by slack, are the PGD starting points.
    let mut seeds: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::new(); spec.disjuncts.len()];
    for (d, conj) in spec.disjuncts.iter().enumerate() {
        let b = conj_box(conj);
        for _ in 0..budget.samples {
            if Instant::now() >= deadline {
                return Ok(None);
            }
            let x: Vec<f64> = sample(&b, &mut rng);
            if let Some(w) = check_point(net, conj, x.clone()) {
                return Ok(Some(w));
            }
            if let Some(v) = min_slack(net, conj, &x) {
                let top = &mut seeds[d];
                let at = top.partition_point(|(t, _)| *t >= v);
                if at < budget.pgd_restarts {
                    top.insert(at, (v, x));
                    top.truncate(budget.pgd_restarts);
                }
            }
        }
    }

    for (d, conj) in spec.disjuncts.iter().enumerate() {
        let b = conj_box(conj);
        for restart in 0..budget.pgd_restarts {
            let start = match seeds[d].get(restart) {
                Some((_, x)) => x.clone(),
                None => sample(&b, &mut rng),
            };
            if let Some(w) = ascend(net, conj, &b, start, budget, deadline)? {
                return Ok(Some(w));
            }
            if Instant::now() >= deadline {
                return Ok(None);
            }
        }
    }
    Ok(None)
}

/// Sign-gradient ascent on the smallest slack from `x`. The step starts at
/// `step_fraction` of each box side and halves whenever a step fails to
/// improve the slack, in which case the iterate returns to the best point.
fn ascend(
    net: &Network,
    conj: &Conjunct,
    b: &HyperBox,
    mut x: Vec<f64>,
    budget: &Budget,
    deadline: Instant,
) -> Result<Option<Witness>, VerifyError> {
    let mut step = budget.step_fraction;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..budget.pgd_steps {
        if Instant::now() >= deadline {
            return Ok(None);
        }
        if let Some(w) = check_point(net, conj, x.clone()) {
            return Ok(Some(w));
        }
        let Some((v, grad)) = slack_gradient(net, conj, &x) else { break };
        match &best {
            Some((bv, bx)) if v <= *bv => {
                step *= 0.5;
                x = bx.clone();
                continue;
            }
            _ => best = Some((v, x.clone())),
        }
        let mut moved = false;
        for (i, g) in grad.iter().enumerate() {
            if *g != 0.0 && b.width(i) > 0.0 {
                x[i] += step * b.width(i) * g.signum();
                moved = true;
            }
        }
        if !moved {
            break;
        }
        b.clamp(&mut x);
    }
    Ok(check_point(net, conj, x))
}

fn min_slack(net: &Network, conj: &Conjunct, x: &[f64]) -> Option<f64> {
    let y = net.forward(x).ok()?;
    conj.constraints.iter().map(|c| -c.value(x, &y)).min_by(f64::total_cmp)
}

fn conj_box(conj: &Conjunct) -> HyperBox {
    HyperBox { lower: conj.input_box.lower.clone(), upper: conj.input_box.upper.clone() }
}

fn sample(b: &HyperBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..b.dim())
        .map(|i| if b.width(i) > 0.0 { rng.gen_range(b.lower[i]..=b.upper[i]) } else { b.lower[i] })
        .collect()
}

pub(super) fn check_point(net: &Network, conj: &Conjunct, x: Vec<f64>) -> Option<Witness> {
    let y = net.forward(&x).ok()?;
    conj.holds(&x, &y, Tolerance::EXACT).then(|| Witness::with_outputs(x, y))
}

/// Smallest slack `min_k -g_k(x, f(x))` over the conjunct's constraints and
/// its gradient with respect to `x`. `None` when the network output is not
/// finite or there are no constraints.
fn slack_gradient(net: &Network, conj: &Conjunct, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    let y = net.forward(x).ok()?;
    let c = conj.constraints.iter().max_by(|a, b| a.value(x, &y).total_cmp(&b.value(x, &y)))?;
    let grad = constraint_gradient(net, &c.x_coeffs, &c.y_coeffs, x).ok()?;
    Some((-c.value(x, &y), grad.into_iter().map(|g| -g).collect()))
}

/// Gradient of `beta · x + alpha · f(x)` with respect to `x`, by reverse-mode
/// differentiation through the network.
pub fn constraint_gradient(net: &Network, beta: &[f64], alpha: &[f64], x: &[f64]) -> Result<Vec<f64>, VerifyError> {
    let (_, mut g) = net.vjp(x, alpha)?;
    for (gi, b) in g.iter_mut().zip(beta) {
        *gi += b;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Affine, Layer, Precision};
    use crate::spec::{InputBox, LinearConstraint};

    fn relu_net() -> Network {
        Network::new(
            1,
            vec![Layer::Affine(Affine::identity(1)), Layer::Activation(Activation::Relu)],
            Precision::F64,
        )
        .unwrap()
    }

    fn spec(lo: f64, hi: f64, y_at_least: f64) -> NormalizedSpec {
        NormalizedSpec {
            n_inputs: 1,
            n_outputs: 1,
            disjuncts: vec![Conjunct {
                input_box: InputBox { lower: vec![lo], upper: vec![hi] },
                constraints: vec![LinearConstraint { x_coeffs: vec![0.0], y_coeffs: vec![-1.0], constant: y_at_least }],
            }],
        }
    }

    #[test]
    fn relu_violation_found() {
        let w = falsify(&relu_net(), &spec(-1.0, 1.0, 0.5), &Budget::easy()).unwrap().unwrap();
        assert!((0.5..=1.0).contains(&w.x[0]));
    }

    #[test]
    fn holding_property_not_falsified() {
        let id = crate::network::gen_trivial_network(1);
        assert!(falsify(&id, &spec(0.0, 1.0, 2.0), &Budget::easy()).unwrap().is_none());
    }

    #[test]
    fn pgd_reaches_thin_region() {
        // Only x in [0.999, 1] works; sampling almost never hits it.
        let mut b = Budget::easy();
        b.samples = 1;
        let id = crate::network::gen_trivial_network(1);
        let w = falsify(&id, &spec(-1000.0, 1.0, 0.999), &b).unwrap().unwrap();
        assert!(w.x[0] >= 0.999);
    }
}
