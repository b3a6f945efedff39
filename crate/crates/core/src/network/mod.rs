//! Feedforward networks: affine layers interleaved with elementwise
//! activations, loaded from ONNX and evaluated in 64-bit arithmetic.

pub mod onnx;

use serde::Serialize;

pub use onnx::{load_network, write_network};

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("malformed ONNX payload: {0}")]
    Decode(#[from] prost::DecodeError),
    #[error("unsupported operator {op} (node {node:?})")]
    UnsupportedOperator { op: String, node: String },
    #[error("unsupported graph structure: {0}")]
    Topology(String),
    #[error("shape inconsistency: {0}")]
    Shape(String),
    #[error("tensor {name:?} has non-float element type {dtype}")]
    NonFloatTensor { name: String, dtype: i32 },
    #[error("non-finite weight in {0}")]
    NonFiniteWeight(String),
    #[error("dimension mismatch: expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value after layer {layer}")]
    NonFinite { layer: usize },
}

/// Floating-point width of the source file. Evaluation is always 64-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at `z`; the ReLU kink takes the inactive side.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// `y = W x + b` with `W` stored row-major, `n_out` rows by `n_in` columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Affine {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn new(n_out: usize, n_in: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, NetworkError> {
        if weights.len() != n_out * n_in || bias.len() != n_out {
            return Err(NetworkError::Shape(format!(
                "affine layer {n_out}x{n_in} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Affine { n_in, n_out, weights, bias })
    }

    pub fn identity(n: usize) -> Self {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        Affine { n_in: n, n_out: n, weights, bias: vec![0.0; n] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_in..(i + 1) * self.n_in]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_out)
            .map(|i| {
                let mut acc = 0.0;
                for (w, v) in self.row(i).iter().zip(x) {
                    acc += w * v;
                }
                acc + self.bias[i]
            })
            .collect()
    }

    /// `Wᵀ g`.
    pub fn transpose_apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_in];
        for (i, gi) in g.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * gi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Layer {
    Affine(Affine),
    Activation(Activation),
    /// Width-preserving reshape or flatten; a no-op on the flat vector.
    Reshape { width: usize },
}

impl Layer {
    fn widths(&self, incoming: usize) -> (usize, usize) {
        match self {
            Layer::Affine(a) => (a.n_in, a.n_out),
            Layer::Activation(_) => (incoming, incoming),
            Layer::Reshape { width } => (*width, *width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub precision: Precision,
}

impl Network {
    /// Builds a network, checking the width chain and that every weight is
    /// finite.
    pub fn new(n_inputs: usize, layers: Vec<Layer>, precision: Precision) -> Result<Self, NetworkError> {
        let mut width = n_inputs;
        for (i, layer) in layers.iter().enumerate() {
            let (n_in, n_out) = layer.widths(width);
            if n_in != width {
                return Err(NetworkError::Shape(format!(
                    "layer {i} expects width {n_in} but receives {width}"
                )));
            }
            if let Layer::Affine(a) = layer {
                if a.weights.iter().chain(&a.bias).any(|v| !v.is_finite()) {
                    return Err(NetworkError::NonFiniteWeight(format!("layer {i}")));
                }
            }
            width = n_out;
        }
        Ok(Network { layers, n_inputs, n_outputs: width, precision })
    }

    pub fn activations(&self) -> impl Iterator<Item = Activation> + '_ {
        self.layers.iter().filter_map(|l| match l {
            Layer::Activation(a) => Some(*a),
            _ => None,
        })
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.activations().all(|a| a == Activation::Relu)
    }

    /// Total width of all activation layers.
    pub fn hidden_neurons(&self) -> usize {
        let mut width = self.n_inputs;
        let mut total = 0;
        for l in &self.layers {
            let (_, out) = l.widths(width);
            if let Layer::Activation(_) = l {
                total += out;
            }
            width = out;
        }
        total
    }

    /// Layer-by-layer evaluation in a fixed summation order.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            h = apply_layer(layer, h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(NetworkError::NonFinite { layer: i });
            }
        }
        Ok(h)
    }

    /// Output and the input gradient of `cotangent · f(x)`.
    pub fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetworkError> {
        self.check_input(x)?;
        if cotangent.len() != self.n_outputs {
            return Err(NetworkError::DimensionMismatch { expected: self.n_outputs, got: cotangent.len() });
        }
        // Inputs to each layer, kept for the backward pass.
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = apply_layer(layer, h.clone());
            if next.iter().any(|v| !v.is_finite()) {
                return Err(NetworkError::NonFinite { layer: i });
            }
            inputs.push(h);
            h = next;
        }
        let mut g = cotangent.to_vec();
        for (layer, input) in self.layers.iter().zip(&inputs).rev() {
            g = match layer {
                Layer::Affine(a) => a.transpose_apply(&g),
                Layer::Activation(act) => g.iter().zip(input).map(|(gi, z)| gi * act.derivative(*z)).collect(),
                Layer::Reshape { .. } => g,
            };
        }
        Ok((h, g))
    }

    /// Pre-activation values feeding each activation layer, in order.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, NetworkError> {
        self.check_input(x)?;
        let mut out = Vec::new();
        let mut h = x.to_vec();
        for layer in &self.layers {
            if let Layer::Activation(_) = layer {
                out.push(h.clone());
            }
            h = apply_layer(layer, h);
        }
        Ok(out)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetworkError> {
        if x.len() != self.n_inputs {
            return Err(NetworkError::DimensionMismatch { expected: self.n_inputs, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite { layer: 0 });
        }
        Ok(())
    }
}

fn apply_layer(layer: &Layer, h: Vec<f64>) -> Vec<f64> {
    match layer {
        Layer::Affine(a) => a.apply(&h),
        Layer::Activation(act) => h.into_iter().map(|z| act.apply(z)).collect(),
        Layer::Reshape { .. } => h,
    }
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, NetworkError> {
        if lower.len() != upper.len() {
            return Err(NetworkError::Shape(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(NetworkError::Shape(format!("box dimension {i} is [{lo}, {hi}]")));
            }
        }
        Ok(HyperBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| l <= v && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Splits at the midpoint of the widest dimension (lowest index on ties).
    pub fn bisect(&self) -> (HyperBox, HyperBox) {
        let mut dim = 0;
        for i in 1..self.dim() {
            if self.width(i) > self.width(dim) {
                dim = i;
            }
        }
        let mid = 0.5 * (self.lower[dim] + self.upper[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }
}

/// Identity network `y = x` with `n_inputs` inputs, used for overhead
/// measurement.
pub fn gen_trivial_network(n_inputs: usize) -> Network {
    assert!(n_inputs >= 1, "trivial networks need at least one input");
    Network::new(n_inputs, vec![Layer::Affine(Affine::identity(n_inputs))], Precision::F32)
        .expect("identity network is well-formed")
}

/// A specification every point of `[0, 1]^n` satisfies for the identity
/// network, so any tool can answer `violated` immediately.
pub fn trivial_spec_text(n_inputs: usize) -> String {
    let mut s = String::from("; trivial instance for overhead measurement\n");
    for i in 0..n_inputs {
        s.push_str(&format!("(declare-const X_{i} Real)\n"));
    }
    for j in 0..n_inputs {
        s.push_str(&format!("(declare-const Y_{j} Real)\n"));
    }
    for i in 0..n_inputs {
        s.push_str(&format!("(assert (>= X_{i} 0.0))\n(assert (<= X_{i} 1.0))\n"));
    }
    s.push_str("(assert (>= Y_0 -1.0))\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_relu() -> Network {
        Network::new(
            1,
            vec![Layer::Affine(Affine::identity(1)), Layer::Activation(Activation::Relu)],
            Precision::F64,
        )
        .unwrap()
    }

    #[test]
    fn relu_clamps() {
        assert_eq!(affine_relu().forward(&[-3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn affine_eval() {
        let net = Network::new(
            1,
            vec![Layer::Affine(Affine::new(1, 1, vec![2.0], vec![1.0]).unwrap())],
            Precision::F64,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![3.0]);
        assert_eq!(net.forward(&[0.5]).unwrap(), vec![2.0]);
    }

    #[test]
    fn width_chain_checked() {
        let err = Network::new(
            2,
            vec![Layer::Affine(Affine::new(1, 3, vec![0.0; 3], vec![0.0]).unwrap())],
            Precision::F64,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Shape(_)));
    }

    #[test]
    fn non_finite_rejected() {
        let err = Network::new(
            1,
            vec![Layer::Affine(Affine::new(1, 1, vec![f64::NAN], vec![0.0]).unwrap())],
            Precision::F64,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::NonFiniteWeight(_)));
        let net = Network::new(
            1,
            vec![Layer::Affine(Affine::new(1, 1, vec![1e300], vec![0.0]).unwrap()), Layer::Affine(Affine::new(1, 1, vec![1e300], vec![0.0]).unwrap())],
            Precision::F64,
        )
        .unwrap();
        assert!(matches!(net.forward(&[1.0]).unwrap_err(), NetworkError::NonFinite { layer: 1 }));
        assert!(matches!(net.forward(&[1.0, 2.0]).unwrap_err(), NetworkError::DimensionMismatch { .. }));
    }

    #[test]
    fn trivial_network_is_identity() {
        let n1 = gen_trivial_network(1);
        assert_eq!((n1.n_inputs, n1.n_outputs), (1, 1));
        assert_eq!(n1.forward(&[7.0]).unwrap(), vec![7.0]);
        let n5 = gen_trivial_network(5);
        assert_eq!((n5.n_inputs, n5.n_outputs), (5, 5));
        let x = [1.0, -2.0, 3.5, 0.0, 9.0];
        assert_eq!(n5.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn bisect_widest_lowest_index() {
        let b = HyperBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 2.0]).unwrap();
        let (l, r) = b.bisect();
        assert_eq!(l.upper, vec![1.0, 1.0, 2.0]);
        assert_eq!(r.lower, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn vjp_matches_manual_gradient() {
        let net = Network::new(
            2,
            vec![
                Layer::Affine(Affine::new(2, 2, vec![1.0, -1.0, 2.0, 0.5], vec![0.0, -1.0]).unwrap()),
                Layer::Activation(Activation::Relu),
                Layer::Affine(Affine::new(1, 2, vec![3.0, -2.0], vec![0.0]).unwrap()),
            ],
            Precision::F64,
        )
        .unwrap();
        // At (1, 0): pre = (1, 1), both active; grad = 3*(1,-1) - 2*(2,0.5).
        let (y, g) = net.vjp(&[1.0, 0.0], &[1.0]).unwrap();
        assert_eq!(y, vec![1.0]);
        assert_eq!(g, vec![-1.0, -4.0]);
    }
}
