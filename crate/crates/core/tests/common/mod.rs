//! Shared fixtures and reference oracles for the integration tests.
//!
//! The oracles here are deliberately written without the library's bound or
//! search code: plain interval arithmetic, a dense grid, and an exact
//! partition of a 2-D input box into the linear regions of a ReLU network.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vnn_harness::network::{Activation, Affine, Layer, Network, Precision};
use vnn_harness::spec::{parse_vnnlib, to_dnf, Conjunct, DnfOptions, NormalizedSpec};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense network with the given layer widths (`sizes[0]` inputs), `act`
/// after every hidden layer, He-style random weights.
pub fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize], act: Activation, precision: Precision) -> Network {
    let mut layers = Vec::new();
    for k in 1..sizes.len() {
        let (n_in, n_out) = (sizes[k - 1], sizes[k]);
        let scale = (2.0 / n_in as f64).sqrt();
        let w: Vec<f64> = (0..n_in * n_out).map(|_| rng.gen_range(-1.0..1.0) * scale * 1.7).collect();
        let b: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (w, b) = match precision {
            Precision::F32 => (w.iter().map(|v| *v as f32 as f64).collect(), b.iter().map(|v| *v as f32 as f64).collect()),
            Precision::F64 => (w, b),
        };
        layers.push(Layer::Affine(Affine::new(n_out, n_in, w, b).unwrap()));
        if k + 1 < sizes.len() {
            layers.push(Layer::Activation(act));
        }
    }
    Network::new(sizes[0], layers, precision).unwrap()
}

pub fn random_relu_net(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Network {
    random_net(rng, sizes, Activation::Relu, Precision::F64)
}

pub fn uniform(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower.iter().zip(upper).map(|(l, u)| if u > l { rng.gen_range(*l..=*u) } else { *l }).collect()
}

pub fn spec_from_text(text: &str) -> NormalizedSpec {
    to_dnf(&parse_vnnlib(text).unwrap(), &DnfOptions::default()).unwrap()
}

pub fn declarations(n_in: usize, n_out: usize) -> String {
    let mut s = String::new();
    for i in 0..n_in {
        s.push_str(&format!("(declare-const X_{i} Real)\n"));
    }
    for j in 0..n_out {
        s.push_str(&format!("(declare-const Y_{j} Real)\n"));
    }
    s
}

pub fn box_asserts(lower: &[f64], upper: &[f64]) -> String {
    let mut s = String::new();
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        s.push_str(&format!("(assert (>= X_{i} {l:?}))\n(assert (<= X_{i} {u:?}))\n"));
    }
    s
}

/// Plain interval propagation, written independently of the library.
pub fn ibp_oracle(net: &Network, lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
    for layer in &net.layers {
        match layer {
            Layer::Affine(a) => {
                let mut nlo = vec![0.0; a.n_out];
                let mut nhi = vec![0.0; a.n_out];
                for o in 0..a.n_out {
                    let (mut l, mut h) = (0.0, 0.0);
                    for i in 0..a.n_in {
                        let w = a.weights[o * a.n_in + i];
                        let (p, q) = (w * lo[i], w * hi[i]);
                        l += p.min(q);
                        h += p.max(q);
                    }
                    nlo[o] = l + a.bias[o];
                    nhi[o] = h + a.bias[o];
                }
                lo = nlo;
                hi = nhi;
            }
            Layer::Activation(act) => {
                lo = lo.iter().map(|v| act.apply(*v)).collect();
                hi = hi.iter().map(|v| act.apply(*v)).collect();
            }
            Layer::Reshape { .. } => {}
        }
    }
    (lo, hi)
}

/// Any point of a `points`-per-axis grid over the conjunct's box satisfying
/// the conjunct exactly.
pub fn grid_search(net: &Network, conj: &Conjunct, points: usize) -> Option<Vec<f64>> {
    let b = &conj.input_box;
    let n = b.lower.len();
    let axis = |i: usize, k: usize| {
        if points == 1 {
            0.5 * (b.lower[i] + b.upper[i])
        } else {
            b.lower[i] + (b.upper[i] - b.lower[i]) * k as f64 / (points - 1) as f64
        }
    };
    let total = points.pow(n as u32);
    for idx in 0..total {
        let mut rest = idx;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let k = rest % points;
                rest /= points;
                axis(i, k)
            })
            .collect();
        let y = net.forward(&x).unwrap();
        if conj.holds(&x, &y, vnn_harness::spec::Tolerance::EXACT) {
            return Some(x);
        }
    }
    None
}

// ------------------------------------------------------------ exact 2-D oracle

type Pt = [f64; 2];

/// `a · p + b`.
#[derive(Clone, Copy, Debug)]
struct Lin {
    a: [f64; 2],
    b: f64,
}

impl Lin {
    fn at(&self, p: &Pt) -> f64 {
        self.a[0] * p[0] + self.a[1] * p[1] + self.b
    }
}

/// Part of the convex polygon where `f <= 0` (Sutherland–Hodgman).
fn clip(poly: &[Pt], f: &Lin) -> Vec<Pt> {
    let mut out = Vec::new();
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let (fp, fq) = (f.at(&p), f.at(&q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn area(poly: &[Pt]) -> f64 {
    let mut s = 0.0;
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

/// A linear region: polygon plus the current layer's values as affine
/// functions of the (embedded 2-D) input.
struct Region {
    poly: Vec<Pt>,
    vals: Vec<Lin>,
}

/// Splits the conjunct's box into the network's linear regions. Inputs of
/// dimension 1 are embedded as `[l, u] x [0, 1]` with no dependence on the
/// second coordinate.
fn regions(net: &Network, lower: &[f64], upper: &[f64]) -> Vec<Region> {
    let n = lower.len();
    assert!(n == 1 || n == 2, "exact oracle handles 1 or 2 inputs");
    let (l1, u1) = if n == 2 { (lower[1], upper[1]) } else { (0.0, 1.0) };
    let poly = vec![[lower[0], l1], [upper[0], l1], [upper[0], u1], [lower[0], u1]];
    let vals = (0..n)
        .map(|i| {
            let mut a = [0.0; 2];
            a[i] = 1.0;
            Lin { a, b: 0.0 }
        })
        .collect();
    let mut regs = vec![Region { poly, vals }];
    for layer in &net.layers {
        match layer {
            Layer::Affine(aff) => {
                for r in &mut regs {
                    r.vals = (0..aff.n_out)
                        .map(|o| {
                            let mut f = Lin { a: [0.0; 2], b: aff.bias[o] };
                            for (i, v) in r.vals.iter().enumerate() {
                                let w = aff.weights[o * aff.n_in + i];
                                f.a[0] += w * v.a[0];
                                f.a[1] += w * v.a[1];
                                f.b += w * v.b;
                            }
                            f
                        })
                        .collect();
                }
            }
            Layer::Activation(Activation::Relu) => {
                let width = regs.first().map_or(0, |r| r.vals.len());
                for k in 0..width {
                    let mut next = Vec::new();
                    for r in regs {
                        let z = r.vals[k];
                        let neg = Lin { a: [-z.a[0], -z.a[1]], b: -z.b };
                        let on = clip(&r.poly, &neg);
                        let off = clip(&r.poly, &z);
                        if on.len() >= 3 && area(&on) > 0.0 {
                            next.push(Region { poly: on, vals: r.vals.clone() });
                        }
                        if off.len() >= 3 && area(&off) > 0.0 {
                            let mut vals = r.vals.clone();
                            vals[k] = Lin { a: [0.0; 2], b: 0.0 };
                            next.push(Region { poly: off, vals });
                        }
                    }
                    regs = next;
                }
            }
            Layer::Activation(a) => panic!("exact oracle needs ReLU networks, got {a:?}"),
            Layer::Reshape { .. } => {}
        }
    }
    regs
}

/// Exact verdict for one conjunct, decided with margin `delta`:
/// `Some(Some(x))` when the conjunct tightened by `delta` is satisfiable (x
/// is an interior witness), `Some(None)` when even the loosened conjunct is
/// unsatisfiable, `None` when the instance is too close to call.
pub fn exact_conjunct(net: &Network, conj: &Conjunct, delta: f64) -> Option<Option<Vec<f64>>> {
    let n = conj.input_box.lower.len();
    let regs = regions(net, &conj.input_box.lower, &conj.input_box.upper);
    let constraint_fns = |r: &Region, shift: f64| -> Vec<Lin> {
        conj.constraints
            .iter()
            .map(|c| {
                let mut f = Lin { a: [0.0; 2], b: c.constant + shift };
                for (i, b) in c.x_coeffs.iter().enumerate() {
                    f.a[i] += b;
                }
                for (j, a) in c.y_coeffs.iter().enumerate() {
                    f.a[0] += a * r.vals[j].a[0];
                    f.a[1] += a * r.vals[j].a[1];
                    f.b += a * r.vals[j].b;
                }
                f
            })
            .collect()
    };
    let mut loose_feasible = false;
    for r in &regs {
        let mut tight = r.poly.clone();
        for f in constraint_fns(r, delta) {
            tight = clip(&tight, &f);
        }
        if !tight.is_empty() {
            let k = tight.len() as f64;
            let c = [tight.iter().map(|p| p[0]).sum::<f64>() / k, tight.iter().map(|p| p[1]).sum::<f64>() / k];
            return Some(Some(c[..n].to_vec()));
        }
        let mut loose = r.poly.clone();
        for f in constraint_fns(r, -delta) {
            loose = clip(&loose, &f);
        }
        loose_feasible |= !loose.is_empty();
    }
    if loose_feasible {
        None
    } else {
        Some(None)
    }
}

/// Exact verdict for a whole spec (any disjunct), with the same three-way
/// answer as [`exact_conjunct`].
pub fn exact_spec(net: &Network, spec: &NormalizedSpec, delta: f64) -> Option<Option<Vec<f64>>> {
    let mut all_unsat = true;
    for conj in &spec.disjuncts {
        match exact_conjunct(net, conj, delta) {
            Some(Some(x)) => return Some(Some(x)),
            Some(None) => {}
            None => all_unsat = false,
        }
    }
    all_unsat.then_some(None)
}

/// A random box + output-constraint spec for a network with `n_in <= 2`
/// inputs, with thresholds drawn from the network's sampled output range so
/// that both verdicts are common.
pub fn random_spec_text(rng: &mut ChaCha8Rng, net: &Network) -> String {
    let (n_in, n_out) = (net.n_inputs, net.n_outputs);
    let mut text = declarations(n_in, n_out);
    let n_disjuncts = if rng.gen_bool(0.3) { 2 } else { 1 };
    let mut disjuncts = Vec::new();
    for _ in 0..n_disjuncts {
        let lower: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..0.5)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.1..1.0)).collect();
        let n_cons = rng.gen_range(1..=2);
        let mut parts: Vec<String> = Vec::new();
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            parts.push(format!("(>= X_{i} {l:?})"));
            parts.push(format!("(<= X_{i} {u:?})"));
        }
        for _ in 0..n_cons {
            let alpha: Vec<f64> = (0..n_out).map(|_| (rng.gen_range(-1.0..1.0f64) * 4.0).round() / 4.0).collect();
            let samples: Vec<f64> = (0..200)
                .map(|_| {
                    let x = uniform(rng, &lower, &upper);
                    let y = net.forward(&x).unwrap();
                    alpha.iter().zip(&y).map(|(a, v)| a * v).sum()
                })
                .collect();
            let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            // Threshold somewhere around the top of the sampled range: above
            // it is often unreachable, below it often reachable.
            let t = max + (max - min + 0.1) * rng.gen_range(-0.3..0.3);
            let lhs: Vec<String> =
                alpha.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| format!("(* {a:?} Y_{j})")).collect();
            let lhs = match lhs.len() {
                0 => "0.0".to_string(),
                1 => lhs[0].clone(),
                _ => format!("(+ {})", lhs.join(" ")),
            };
            parts.push(format!("(>= {lhs} {t:?})"));
        }
        disjuncts.push(format!("(and {})", parts.join(" ")));
    }
    if disjuncts.len() == 1 {
        text.push_str(&format!("(assert {})\n", disjuncts[0]));
    } else {
        text.push_str(&format!("(assert (or {}))\n", disjuncts.join(" ")));
    }
    text
}

/// A spec that the point `x_star` satisfies: a box around it and a
/// threshold on one output (or output difference) at its value there.
pub struct Planted {
    pub spec: NormalizedSpec,
    pub text: String,
    pub x_star: Vec<f64>,
}

/// Plants a violation: `x_star` is the best of a few hundred samples for a
/// random output objective, and the spec asks for an output at least that
/// good.
pub fn planted_violation(rng: &mut ChaCha8Rng, net: &Network) -> Planted {
    let (n_in, n_out) = (net.n_inputs, net.n_outputs);
    let center: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let radius = rng.gen_range(0.05..0.5);
    let lower: Vec<f64> = center.iter().map(|c| c - radius).collect();
    let upper: Vec<f64> = center.iter().map(|c| c + radius).collect();
    let j = rng.gen_range(0..n_out);
    let k = (j + 1 + rng.gen_range(0..n_out.max(2) - 1)) % n_out;
    let difference = n_out > 1 && rng.gen_bool(0.5);
    let objective = |y: &[f64]| if difference { y[j] - y[k] } else { y[j] };
    let mut best = (f64::NEG_INFINITY, center.clone());
    for _ in 0..300 {
        let x = uniform(rng, &lower, &upper);
        let v = objective(&net.forward(&x).unwrap());
        if v > best.0 {
            best = (v, x);
        }
    }
    let mut text = declarations(n_in, n_out);
    text.push_str(&box_asserts(&lower, &upper));
    if difference {
        text.push_str(&format!("(assert (>= (- Y_{j} Y_{k}) {:?}))\n", best.0));
    } else {
        text.push_str(&format!("(assert (>= Y_{j} {:?}))\n", best.0));
    }
    Planted { spec: spec_from_text(&text), text, x_star: best.1 }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}
