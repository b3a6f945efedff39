//! Interval and symbolic affine bound propagation.

use serde::Serialize;

use crate::network::{Activation, Affine, HyperBox, Layer, Network, NetworkError};

use super::VerifyError;

/// Symbolic bounds looser than interval bounds by more than this are replaced
/// by the interval constant.
const DOMINANCE_SLACK: f64 = 1e-12;

/// Pre-activation ranges narrower than this get widened before the chord
/// slope is computed.
const MIN_RELU_WIDTH: f64 = 1e-12;

/// `coeffs · x + constant` over the network inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineFn {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineFn {
    pub fn constant(n: usize, c: f64) -> Self {
        AffineFn { coeffs: vec![0.0; n], constant: c }
    }

    fn input(n: usize, i: usize) -> Self {
        let mut f = AffineFn::constant(n, 0.0);
        f.coeffs[i] = 1.0;
        f
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, v) in self.coeffs.iter().zip(x) {
            acc += c * v;
        }
        acc + self.constant
    }

    /// Minimum over the box.
    pub fn min_over(&self, b: &HyperBox) -> f64 {
        let mut acc = 0.0;
        for ((c, lo), hi) in self.coeffs.iter().zip(&b.lower).zip(&b.upper) {
            acc += if *c >= 0.0 { c * lo } else { c * hi };
        }
        acc + self.constant
    }

    /// Maximum over the box.
    pub fn max_over(&self, b: &HyperBox) -> f64 {
        let mut acc = 0.0;
        for ((c, lo), hi) in self.coeffs.iter().zip(&b.lower).zip(&b.upper) {
            acc += if *c >= 0.0 { c * hi } else { c * lo };
        }
        acc + self.constant
    }

    /// Box corner where the function is smallest (lower end on zero slopes).
    pub fn argmin_corner(&self, b: &HyperBox) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(&b.lower)
            .zip(&b.upper)
            .map(|((c, lo), hi)| if *c >= 0.0 { *lo } else { *hi })
            .collect()
    }

    fn add_scaled(&mut self, other: &AffineFn, k: f64) {
        if k == 0.0 {
            return;
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += k * b;
        }
        self.constant += k * other.constant;
    }

    fn scaled(&self, k: f64) -> AffineFn {
        AffineFn { coeffs: self.coeffs.iter().map(|c| c * k).collect(), constant: self.constant * k }
    }
}

/// Output enclosure of every layer, by interval arithmetic. Entry `i` bounds
/// the output of layer `i`; the last entry bounds the network output.
///
/// Dot products accumulate in the same order as [`Network::forward`], so the
/// enclosure holds exactly for floating-point evaluation, not just over the
/// reals.
pub fn interval_bounds(net: &Network, input: &HyperBox) -> Result<Vec<HyperBox>, VerifyError> {
    check_box(net, input)?;
    let mut cur = input.clone();
    let mut out = Vec::with_capacity(net.layers.len());
    for (i, layer) in net.layers.iter().enumerate() {
        cur = match layer {
            Layer::Affine(a) => interval_affine(a, &cur),
            Layer::Activation(act) => HyperBox {
                lower: cur.lower.iter().map(|&l| act.apply(l)).collect(),
                upper: cur.upper.iter().map(|&u| act.apply(u)).collect(),
            },
            Layer::Reshape { .. } => cur,
        };
        check_finite(&cur, i)?;
        out.push(cur.clone());
    }
    Ok(out)
}

fn interval_affine(a: &Affine, b: &HyperBox) -> HyperBox {
    let mut lower = Vec::with_capacity(a.n_out);
    let mut upper = Vec::with_capacity(a.n_out);
    for i in 0..a.n_out {
        let (mut lo, mut hi) = (0.0, 0.0);
        for ((w, l), u) in a.row(i).iter().zip(&b.lower).zip(&b.upper) {
            if *w >= 0.0 {
                lo += w * l;
                hi += w * u;
            } else {
                lo += w * u;
                hi += w * l;
            }
        }
        lower.push(lo + a.bias[i]);
        upper.push(hi + a.bias[i]);
    }
    HyperBox { lower, upper }
}

fn check_box(net: &Network, b: &HyperBox) -> Result<(), VerifyError> {
    if b.dim() != net.n_inputs {
        return Err(VerifyError::DimensionMismatch { what: "input box", expected: net.n_inputs, got: b.dim() });
    }
    Ok(())
}

fn check_finite(b: &HyperBox, layer: usize) -> Result<(), VerifyError> {
    if b.lower.iter().chain(&b.upper).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NetworkError::NonFinite { layer }.into())
    }
}

/// Independent lower and upper affine functions of the inputs for every
/// network output, valid over `input`, plus the concrete per-layer ranges
/// they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineBounds {
    pub input: HyperBox,
    pub lower: Vec<AffineFn>,
    pub upper: Vec<AffineFn>,
    /// Concrete range of every layer's output, each contained in the
    /// corresponding interval bound.
    pub layers: Vec<HyperBox>,
}

impl AffineBounds {
    /// Concrete output enclosure.
    pub fn output(&self) -> &HyperBox {
        self.layers.last().unwrap_or(&self.input)
    }

    /// Affine lower bound of `alpha · y + beta · x + c` over the box.
    pub fn combine_lower(&self, alpha: &[f64], beta: &[f64], c: f64) -> AffineFn {
        let mut f = AffineFn { coeffs: beta.to_vec(), constant: c };
        for (j, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                f.add_scaled(&self.lower[j], a);
            } else if a < 0.0 {
                f.add_scaled(&self.upper[j], a);
            }
        }
        f
    }

    /// Affine upper bound of `alpha · y + beta · x + c` over the box.
    pub fn combine_upper(&self, alpha: &[f64], beta: &[f64], c: f64) -> AffineFn {
        let mut f = AffineFn { coeffs: beta.to_vec(), constant: c };
        for (j, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                f.add_scaled(&self.upper[j], a);
            } else if a < 0.0 {
                f.add_scaled(&self.lower[j], a);
            }
        }
        f
    }

    /// Lower and upper bound of `alpha · y + beta · x + c`: the better of the
    /// symbolic and the interval estimate on each side.
    pub fn linear_range(&self, alpha: &[f64], beta: &[f64], c: f64) -> (f64, f64) {
        let out = self.output();
        let beta_fn = AffineFn { coeffs: beta.to_vec(), constant: c };
        let (mut ilo, mut ihi) = (beta_fn.min_over(&self.input), beta_fn.max_over(&self.input));
        for ((a, l), u) in alpha.iter().zip(&out.lower).zip(&out.upper) {
            if *a >= 0.0 {
                ilo += a * l;
                ihi += a * u;
            } else {
                ilo += a * u;
                ihi += a * l;
            }
        }
        let slo = self.combine_lower(alpha, beta, c).min_over(&self.input);
        let shi = self.combine_upper(alpha, beta, c).max_over(&self.input);
        (slo.max(ilo), shi.min(ihi))
    }
}

/// Forward symbolic bounds for a ReLU network over `input`.
///
/// Each neuron carries an affine lower and upper function of the inputs.
/// Stable ReLUs pass both through (or zero them); an unstable ReLU with
/// pre-activation range `[l, u]` gets the chord `u (z - l) / (u - l)` applied to
/// its upper function, and its lower function becomes `0` when `|l| >= u` and
/// stays the identity otherwise. Whenever a concretized symbolic bound is
/// looser than the interval bound, the interval constant replaces it, so the
/// result is never looser than [`interval_bounds`].
pub fn affine_bounds(net: &Network, input: &HyperBox) -> Result<AffineBounds, VerifyError> {
    propagate(net, input, None)
}

/// [`affine_bounds`] over a sub-box of `parent.input`, additionally
/// intersecting every layer's concrete range with the parent's, so bounds
/// never loosen under splitting.
pub fn affine_bounds_refined(net: &Network, input: &HyperBox, parent: &AffineBounds) -> Result<AffineBounds, VerifyError> {
    propagate(net, input, Some(&parent.layers))
}

fn propagate(net: &Network, input: &HyperBox, prior: Option<&[HyperBox]>) -> Result<AffineBounds, VerifyError> {
    if let Some(act) = net.activations().find(|a| *a != Activation::Relu) {
        return Err(VerifyError::UnsupportedActivation(act));
    }
    let ibp = interval_bounds(net, input)?;
    let n = net.n_inputs;
    let mut lower: Vec<AffineFn> = (0..n).map(|i| AffineFn::input(n, i)).collect();
    let mut upper = lower.clone();
    let mut range = input.clone();
    let mut layers = Vec::with_capacity(net.layers.len());

    for (k, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Affine(a) => {
                let mut new_lower = Vec::with_capacity(a.n_out);
                let mut new_upper = Vec::with_capacity(a.n_out);
                for i in 0..a.n_out {
                    let mut lo = AffineFn::constant(n, a.bias[i]);
                    let mut hi = AffineFn::constant(n, a.bias[i]);
                    for (j, &w) in a.row(i).iter().enumerate() {
                        if w > 0.0 {
                            lo.add_scaled(&lower[j], w);
                            hi.add_scaled(&upper[j], w);
                        } else if w < 0.0 {
                            lo.add_scaled(&upper[j], w);
                            hi.add_scaled(&lower[j], w);
                        }
                    }
                    new_lower.push(lo);
                    new_upper.push(hi);
                }
                lower = new_lower;
                upper = new_upper;
            }
            Layer::Activation(_) => {
                for i in 0..lower.len() {
                    let (l, u) = (range.lower[i], range.upper[i]);
                    if u <= 0.0 {
                        lower[i] = AffineFn::constant(n, 0.0);
                        upper[i] = AffineFn::constant(n, 0.0);
                    } else if l >= 0.0 {
                        // Stable active: identity.
                    } else {
                        let slope = u / (u - l).max(MIN_RELU_WIDTH);
                        let mut chord = upper[i].scaled(slope);
                        chord.constant -= slope * l;
                        upper[i] = chord;
                        if -l >= u {
                            lower[i] = AffineFn::constant(n, 0.0);
                        }
                    }
                }
            }
            Layer::Reshape { .. } => {}
        }

        // Concretize, fall back to interval constants where they are tighter,
        // and intersect with the interval (and parent) ranges.
        let ib = &ibp[k];
        let mut cur = HyperBox { lower: Vec::with_capacity(lower.len()), upper: Vec::with_capacity(lower.len()) };
        for i in 0..lower.len() {
            let slo = lower[i].min_over(input);
            let shi = upper[i].max_over(input);
            if slo < ib.lower[i] - DOMINANCE_SLACK * (1.0 + ib.lower[i].abs()) {
                lower[i] = AffineFn::constant(n, ib.lower[i]);
            }
            if shi > ib.upper[i] + DOMINANCE_SLACK * (1.0 + ib.upper[i].abs()) {
                upper[i] = AffineFn::constant(n, ib.upper[i]);
            }
            let mut lo = slo.max(ib.lower[i]);
            let mut hi = shi.min(ib.upper[i]);
            if let Some(p) = prior.and_then(|p| p.get(k)) {
                lo = lo.max(p.lower[i]);
                hi = hi.min(p.upper[i]);
            }
            cur.lower.push(lo);
            cur.upper.push(hi.max(lo));
        }
        check_finite(&cur, k)?;
        range = cur.clone();
        layers.push(cur);
    }
    Ok(AffineBounds { input: input.clone(), lower, upper, layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Precision;

    fn b(lo: &[f64], hi: &[f64]) -> HyperBox {
        HyperBox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn interval_examples() {
        let relu = Network::new(
            1,
            vec![Layer::Affine(Affine::identity(1)), Layer::Activation(Activation::Relu)],
            Precision::F64,
        )
        .unwrap();
        let out = interval_bounds(&relu, &b(&[-1.0], &[2.0])).unwrap();
        assert_eq!(out.last().unwrap(), &b(&[0.0], &[2.0]));

        let lin = Network::new(1, vec![Layer::Affine(Affine::new(1, 1, vec![2.0], vec![1.0]).unwrap())], Precision::F64)
            .unwrap();
        let out = interval_bounds(&lin, &b(&[0.0], &[1.0])).unwrap();
        assert_eq!(out.last().unwrap(), &b(&[1.0], &[3.0]));
    }

    #[test]
    fn relu_chord() {
        let net = Network::new(
            1,
            vec![Layer::Affine(Affine::identity(1)), Layer::Activation(Activation::Relu)],
            Precision::F64,
        )
        .unwrap();
        let ab = affine_bounds(&net, &b(&[-1.0], &[1.0])).unwrap();
        assert_eq!(ab.upper[0].coeffs, vec![0.5]);
        assert_eq!(ab.upper[0].constant, 0.5);
        assert_eq!(ab.upper[0].eval(&[1.0]), 1.0);
        assert_eq!(ab.output().upper[0], 1.0);
        // |l| >= u picks the zero lower bound.
        assert_eq!(ab.lower[0], AffineFn::constant(1, 0.0));
    }

    #[test]
    fn affine_network_is_exact() {
        let a = Affine::new(2, 2, vec![1.0, -2.0, 0.5, 3.0], vec![1.0, -1.0]).unwrap();
        let net = Network::new(2, vec![Layer::Affine(a.clone())], Precision::F64).unwrap();
        let ab = affine_bounds(&net, &b(&[-1.0, 0.0], &[1.0, 2.0])).unwrap();
        for i in 0..2 {
            assert_eq!(ab.lower[i].coeffs, a.row(i));
            assert_eq!(ab.lower[i].constant, a.bias[i]);
            assert_eq!(ab.lower[i], ab.upper[i]);
        }
    }

    #[test]
    fn sigmoid_unsupported() {
        let net = Network::new(
            1,
            vec![Layer::Affine(Affine::identity(1)), Layer::Activation(Activation::Sigmoid)],
            Precision::F64,
        )
        .unwrap();
        assert!(matches!(
            affine_bounds(&net, &b(&[0.0], &[1.0])),
            Err(VerifyError::UnsupportedActivation(Activation::Sigmoid))
        ));
        let ib = interval_bounds(&net, &b(&[0.0], &[1.0])).unwrap();
        assert_eq!(ib[1].lower[0], 0.5);
    }
}
