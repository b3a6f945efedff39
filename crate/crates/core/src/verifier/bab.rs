//! Input-splitting branch and bound.

use std::time::Instant;

use log::debug;

use crate::network::{HyperBox, Network};
use crate::spec::{Conjunct, NormalizedSpec};
use crate::Status;

use super::bounds::{affine_bounds, affine_bounds_refined, AffineBounds};
use super::falsify::{check_point, falsify};
use super::{check_compatible, Budget, Outcome, Stats, VerifyError};

/// A constraint counts as infeasible on a box only when its lower bound
/// clears zero by this much.
const PRUNE_MARGIN: f64 = 1e-10;

/// Boxes whose widest side is below this are not split further.
const MIN_SPLIT_WIDTH: f64 = 1e-9;

/// Decides whether `spec` is satisfiable over `net`.
///
/// The falsifier runs first. Then each disjunct's input box is explored depth
/// first: a sub-box is discarded when bounds show some constraint cannot be
/// met anywhere in it, answered when bounds show every point of it satisfies
/// the conjunct, and otherwise bisected along its widest side. A candidate
/// point (the centre and each constraint's most promising corner) is checked
/// at every node.
///
/// Networks with Sigmoid or Tanh activations get the falsifier only and are
/// reported `Unknown` if it fails.
pub fn verify(net: &Network, spec: &NormalizedSpec, budget: &Budget) -> Outcome {
    let start = Instant::now();
    let mut stats = Stats::default();
    let finish = |mut o: Outcome, stats: Stats| {
        o.stats = Stats { seconds: start.elapsed().as_secs_f64(), ..stats };
        o
    };
    let fail = |e: VerifyError, stats: Stats| {
        let mut o = Outcome::new(Status::Error, stats);
        o.message = Some(e.to_string());
        finish(o, stats)
    };

    if let Err(e) = check_compatible(net, spec).and_then(|_| budget.validate()) {
        return fail(e, stats);
    }
    if spec.disjuncts.is_empty() {
        return finish(Outcome::new(Status::Holds, stats), stats);
    }
    match falsify(net, spec, budget) {
        Ok(Some(w)) => {
            let mut o = Outcome::new(Status::Violated, stats);
            o.witness = Some(w);
            return finish(o, stats);
        }
        Ok(None) => {}
        Err(e) => return fail(e, stats),
    }
    if !net.is_piecewise_linear() {
        let mut o = Outcome::new(Status::Unknown, stats);
        o.message = Some("complete search needs ReLU-only networks; falsifier found nothing".into());
        return finish(o, stats);
    }

    let mut undecided = false;
    for (d, conj) in spec.disjuncts.iter().enumerate() {
        let root = HyperBox { lower: conj.input_box.lower.clone(), upper: conj.input_box.upper.clone() };
        let mut stack: Vec<(HyperBox, Option<AffineBounds>)> = vec![(root, None)];
        while let Some((b, parent)) = stack.pop() {
            if start.elapsed() >= budget.time_limit || stats.subproblems >= budget.max_subproblems {
                let mut o = Outcome::new(Status::Timeout, stats);
                o.message = Some(format!("budget exhausted after {} subproblems", stats.subproblems));
                return finish(o, stats);
            }
            stats.subproblems += 1;
            let bounds = match parent {
                None => affine_bounds(net, &b),
                Some(p) => affine_bounds_refined(net, &b, &p),
            };
            let bounds = match bounds {
                Ok(bounds) => bounds,
                Err(e) => return fail(e, stats),
            };
            match classify(net, conj, &bounds) {
                Node::Infeasible => continue,
                Node::Witness(w) => {
                    debug!("disjunct {d}: witness after {} subproblems", stats.subproblems);
                    let mut o = Outcome::new(Status::Violated, stats);
                    o.witness = Some(w);
                    return finish(o, stats);
                }
                Node::Open => {}
            }
            let widest = (0..b.dim()).map(|i| b.width(i)).fold(0.0, f64::max);
            let scale = b.lower.iter().chain(&b.upper).fold(1.0f64, |m, v| m.max(v.abs()));
            if widest <= MIN_SPLIT_WIDTH * scale {
                undecided = true;
                continue;
            }
            let (left, right) = b.bisect();
            stack.push((right, Some(bounds.clone())));
            stack.push((left, Some(bounds)));
        }
        debug!("disjunct {d} exhausted after {} subproblems", stats.subproblems);
    }
    if undecided {
        let mut o = Outcome::new(Status::Unknown, stats);
        o.message = Some("some sub-boxes reached the minimum width without a decision".into());
        return finish(o, stats);
    }
    finish(Outcome::new(Status::Holds, stats), stats)
}

enum Node {
    Infeasible,
    Witness(crate::spec::Witness),
    Open,
}

fn classify(net: &Network, conj: &Conjunct, bounds: &AffineBounds) -> Node {
    let b = &bounds.input;
    let mut all_hold = true;
    let mut candidates = vec![b.center()];
    for c in &conj.constraints {
        let (lo, hi) = bounds.linear_range(&c.y_coeffs, &c.x_coeffs, c.constant);
        if lo > PRUNE_MARGIN {
            return Node::Infeasible;
        }
        all_hold &= hi <= 0.0;
        candidates.push(bounds.combine_lower(&c.y_coeffs, &c.x_coeffs, c.constant).argmin_corner(b));
    }
    if all_hold {
        candidates.truncate(1);
    }
    for x in candidates {
        if let Some(w) = check_point(net, conj, x) {
            return Node::Witness(w);
        }
    }
    Node::Open
}
