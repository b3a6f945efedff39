//! ONNX reader for single-path feedforward graphs.
//!
//! Supported operators: `MatMul`, `Gemm`, `Add`, `Sub`, `Relu`, `Sigmoid`,
//! `Tanh`, `Flatten`, `Reshape`, `Identity`, `Constant`. Runs of affine
//! operators are fused into one [`Affine`] layer. Anything else, or any node
//! that takes two computed tensors, is rejected.

use std::collections::HashMap;

use prost::Message;

use super::{Activation, Affine, Layer, Network, NetworkError, Precision};

/// The subset of `onnx.proto` the loader needs. Field numbers follow the
/// upstream schema.
pub mod proto {
    #[derive(Clone, PartialEq, prost::Message)]
    pub struct ModelProto {
        #[prost(int64, tag = "1")]
        pub ir_version: i64,
        #[prost(string, tag = "2")]
        pub producer_name: String,
        #[prost(message, optional, tag = "7")]
        pub graph: Option<GraphProto>,
        #[prost(message, repeated, tag = "8")]
        pub opset_import: Vec<OperatorSetIdProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct OperatorSetIdProto {
        #[prost(string, tag = "1")]
        pub domain: String,
        #[prost(int64, tag = "2")]
        pub version: i64,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct GraphProto {
        #[prost(message, repeated, tag = "1")]
        pub node: Vec<NodeProto>,
        #[prost(string, tag = "2")]
        pub name: String,
        #[prost(message, repeated, tag = "5")]
        pub initializer: Vec<TensorProto>,
        #[prost(message, repeated, tag = "11")]
        pub input: Vec<ValueInfoProto>,
        #[prost(message, repeated, tag = "12")]
        pub output: Vec<ValueInfoProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct NodeProto {
        #[prost(string, repeated, tag = "1")]
        pub input: Vec<String>,
        #[prost(string, repeated, tag = "2")]
        pub output: Vec<String>,
        #[prost(string, tag = "3")]
        pub name: String,
        #[prost(string, tag = "4")]
        pub op_type: String,
        #[prost(message, repeated, tag = "5")]
        pub attribute: Vec<AttributeProto>,
        #[prost(string, tag = "7")]
        pub domain: String,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct AttributeProto {
        #[prost(string, tag = "1")]
        pub name: String,
        #[prost(float, tag = "2")]
        pub f: f32,
        #[prost(int64, tag = "3")]
        pub i: i64,
        #[prost(bytes = "vec", tag = "4")]
        pub s: Vec<u8>,
        #[prost(message, optional, tag = "5")]
        pub t: Option<TensorProto>,
        #[prost(float, repeated, packed = "false", tag = "7")]
        pub floats: Vec<f32>,
        #[prost(int64, repeated, packed = "false", tag = "8")]
        pub ints: Vec<i64>,
        #[prost(int32, tag = "20")]
        pub r#type: i32,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorProto {
        #[prost(int64, repeated, packed = "false", tag = "1")]
        pub dims: Vec<i64>,
        #[prost(int32, tag = "2")]
        pub data_type: i32,
        #[prost(float, repeated, tag = "4")]
        pub float_data: Vec<f32>,
        #[prost(int32, repeated, tag = "5")]
        pub int32_data: Vec<i32>,
        #[prost(int64, repeated, tag = "7")]
        pub int64_data: Vec<i64>,
        #[prost(string, tag = "8")]
        pub name: String,
        #[prost(bytes = "vec", tag = "9")]
        pub raw_data: Vec<u8>,
        #[prost(double, repeated, tag = "10")]
        pub double_data: Vec<f64>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct ValueInfoProto {
        #[prost(string, tag = "1")]
        pub name: String,
        #[prost(message, optional, tag = "2")]
        pub r#type: Option<TypeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TypeProto {
        #[prost(message, optional, tag = "1")]
        pub tensor_type: Option<TensorTypeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorTypeProto {
        #[prost(int32, tag = "1")]
        pub elem_type: i32,
        #[prost(message, optional, tag = "2")]
        pub shape: Option<TensorShapeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorShapeProto {
        #[prost(message, repeated, tag = "1")]
        pub dim: Vec<Dimension>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct Dimension {
        #[prost(int64, optional, tag = "1")]
        pub dim_value: Option<i64>,
        #[prost(string, optional, tag = "2")]
        pub dim_param: Option<String>,
    }

    pub const FLOAT: i32 = 1;
    pub const INT32: i32 = 6;
    pub const INT64: i32 = 7;
    pub const DOUBLE: i32 = 11;
}

use proto::{GraphProto, NodeProto, TensorProto, ValueInfoProto};

#[derive(Debug, Clone)]
struct Constant {
    dims: Vec<usize>,
    values: Vec<f64>,
    float: bool,
}

impl Constant {
    /// Dimensions with leading unit (batch) axes removed, keeping at least
    /// two axes.
    fn matrix_dims(&self) -> Vec<usize> {
        let extra = self.dims.len().saturating_sub(2);
        let first = self.dims[..extra].iter().position(|&d| d != 1).unwrap_or(extra);
        self.dims[first..].to_vec()
    }

    /// Broadcasts a scalar or vector constant to `width` entries.
    fn as_vector(&self, width: usize, node: &str) -> Result<Vec<f64>, NetworkError> {
        match self.values.len() {
            1 => Ok(vec![self.values[0]; width]),
            n if n == width => Ok(self.values.clone()),
            n => Err(NetworkError::Shape(format!(
                "node {node:?}: constant of {n} elements cannot broadcast to width {width}"
            ))),
        }
    }
}

fn decode_tensor(t: &TensorProto) -> Result<Constant, NetworkError> {
    let dims: Vec<usize> = t.dims.iter().map(|&d| d.max(0) as usize).collect();
    let count: usize = dims.iter().product();
    let values: Vec<f64> = match t.data_type {
        proto::FLOAT => {
            if !t.raw_data.is_empty() {
                t.raw_data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
            } else {
                t.float_data.iter().map(|&v| v as f64).collect()
            }
        }
        proto::DOUBLE => {
            if !t.raw_data.is_empty() {
                t.raw_data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
            } else {
                t.double_data.clone()
            }
        }
        proto::INT64 => {
            if !t.raw_data.is_empty() {
                t.raw_data.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap()) as f64).collect()
            } else {
                t.int64_data.iter().map(|&v| v as f64).collect()
            }
        }
        proto::INT32 => {
            if !t.raw_data.is_empty() {
                t.raw_data.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
            } else {
                t.int32_data.iter().map(|&v| v as f64).collect()
            }
        }
        other => return Err(NetworkError::NonFloatTensor { name: t.name.clone(), dtype: other }),
    };
    if values.len() != count {
        return Err(NetworkError::Shape(format!(
            "tensor {:?} declares {count} elements but stores {}",
            t.name,
            values.len()
        )));
    }
    let float = matches!(t.data_type, proto::FLOAT | proto::DOUBLE);
    Ok(Constant { dims, values, float })
}

fn value_width(v: &ValueInfoProto) -> Option<usize> {
    let shape = v.r#type.as_ref()?.tensor_type.as_ref()?.shape.as_ref()?;
    Some(
        shape
            .dim
            .iter()
            .map(|d| match d.dim_value {
                Some(n) if n > 0 => n as usize,
                _ => 1,
            })
            .product(),
    )
}

fn value_elem_type(v: &ValueInfoProto) -> Option<i32> {
    Some(v.r#type.as_ref()?.tensor_type.as_ref()?.elem_type)
}

/// Affine map accumulated from consecutive affine operators. `matrix: None`
/// means identity.
struct Pending {
    matrix: Option<Affine>,
    bias: Vec<f64>,
}

impl Pending {
    fn identity(width: usize) -> Self {
        Pending { matrix: None, bias: vec![0.0; width] }
    }

    /// Composes `y = W·(current) + b` on top of the pending map.
    fn then_matrix(self, w: Affine) -> Self {
        let shifted = w.apply(&self.bias);
        let matrix = match self.matrix {
            None => Affine { bias: vec![0.0; w.n_out], ..w.clone() },
            Some(prev) => {
                let mut weights = vec![0.0; w.n_out * prev.n_in];
                for i in 0..w.n_out {
                    for k in 0..w.n_in {
                        let wik = w.weights[i * w.n_in + k];
                        if wik == 0.0 {
                            continue;
                        }
                        for j in 0..prev.n_in {
                            weights[i * prev.n_in + j] += wik * prev.weights[k * prev.n_in + j];
                        }
                    }
                }
                Affine { n_in: prev.n_in, n_out: w.n_out, weights, bias: vec![0.0; w.n_out] }
            }
        };
        Pending { matrix: Some(matrix), bias: shifted }
    }

    fn negate(mut self, width: usize) -> Self {
        let mut m = self.matrix.take().unwrap_or_else(|| Affine::identity(width));
        m.weights.iter_mut().for_each(|w| *w = -*w);
        self.bias.iter_mut().for_each(|b| *b = -*b);
        Pending { matrix: Some(m), bias: self.bias }
    }

    fn into_layer(self) -> Layer {
        let width = self.bias.len();
        let mut a = self.matrix.unwrap_or_else(|| Affine::identity(width));
        a.bias = self.bias;
        Layer::Affine(a)
    }
}

struct Loader<'g> {
    constants: HashMap<&'g str, Constant>,
    layers: Vec<Layer>,
    pending: Option<Pending>,
    width: usize,
}

impl<'g> Loader<'g> {
    fn pending_mut(&mut self) -> &mut Pending {
        let width = self.width;
        self.pending.get_or_insert_with(|| Pending::identity(width))
    }

    fn flush(&mut self) {
        if let Some(p) = self.pending.take() {
            self.layers.push(p.into_layer());
        }
    }

    fn constant(&self, name: &str, node: &NodeProto) -> Result<&Constant, NetworkError> {
        self.constants
            .get(name)
            .ok_or_else(|| NetworkError::Topology(format!("node {:?}: {name:?} is not a constant", node.name)))
    }

    fn float_constant(&self, name: &str, node: &NodeProto) -> Result<&Constant, NetworkError> {
        let c = self.constant(name, node)?;
        if !c.float {
            return Err(NetworkError::NonFloatTensor { name: name.to_string(), dtype: proto::INT64 });
        }
        Ok(c)
    }

    /// `MatMul` with the computed tensor on the left (`x·B`) or right (`A·x`).
    fn matmul(&mut self, node: &NodeProto, dynamic_left: bool, other: &str) -> Result<(), NetworkError> {
        let c = self.float_constant(other, node)?.clone();
        let dims = c.matrix_dims();
        let (rows, cols) = match dims.as_slice() {
            [n] => (*n, 1),
            [r, k] => (*r, *k),
            _ => return Err(NetworkError::Shape(format!("node {:?}: matrix of shape {:?}", node.name, c.dims))),
        };
        let w = if dynamic_left {
            // x[1,rows] · B[rows,cols]  =>  W = Bᵀ (cols × rows)
            if rows != self.width {
                return Err(NetworkError::Shape(format!(
                    "node {:?}: MatMul expects width {rows}, got {}",
                    node.name, self.width
                )));
            }
            let mut weights = vec![0.0; rows * cols];
            for r in 0..rows {
                for k in 0..cols {
                    weights[k * rows + r] = c.values[r * cols + k];
                }
            }
            Affine::new(cols, rows, weights, vec![0.0; cols])?
        } else {
            if cols != self.width {
                return Err(NetworkError::Shape(format!(
                    "node {:?}: MatMul expects width {cols}, got {}",
                    node.name, self.width
                )));
            }
            Affine::new(rows, cols, c.values.clone(), vec![0.0; rows])?
        };
        let out = w.n_out;
        let p = self.pending.take().unwrap_or_else(|| Pending::identity(self.width));
        self.pending = Some(p.then_matrix(w));
        self.width = out;
        Ok(())
    }

    fn gemm(&mut self, node: &NodeProto) -> Result<(), NetworkError> {
        let attr = |name: &str| node.attribute.iter().find(|a| a.name == name);
        let alpha = attr("alpha").map_or(1.0, |a| a.f as f64);
        let beta = attr("beta").map_or(1.0, |a| a.f as f64);
        let trans_a = attr("transA").map_or(0, |a| a.i);
        let trans_b = attr("transB").map_or(0, |a| a.i);
        if trans_a != 0 {
            return Err(NetworkError::Topology(format!("node {:?}: Gemm with transA on the input", node.name)));
        }
        let b = self.float_constant(&node.input[1], node)?.clone();
        let [d0, d1] = b.dims.as_slice() else {
            return Err(NetworkError::Shape(format!("node {:?}: Gemm B has shape {:?}", node.name, b.dims)));
        };
        // B' = transB ? Bᵀ : B, shape (n_in × n_out); W = alpha·B'ᵀ.
        let (n_in, n_out) = if trans_b != 0 { (*d1, *d0) } else { (*d0, *d1) };
        if n_in != self.width {
            return Err(NetworkError::Shape(format!(
                "node {:?}: Gemm expects width {n_in}, got {}",
                node.name, self.width
            )));
        }
        let mut weights = vec![0.0; n_out * n_in];
        for o in 0..n_out {
            for i in 0..n_in {
                let v = if trans_b != 0 { b.values[o * n_in + i] } else { b.values[i * n_out + o] };
                weights[o * n_in + i] = alpha * v;
            }
        }
        let p = self.pending.take().unwrap_or_else(|| Pending::identity(self.width));
        let mut p = p.then_matrix(Affine::new(n_out, n_in, weights, vec![0.0; n_out])?);
        self.width = n_out;
        if let Some(c_name) = node.input.get(2).filter(|s| !s.is_empty()) {
            let c = self.float_constant(c_name, node)?.as_vector(n_out, &node.name)?;
            for (b, v) in p.bias.iter_mut().zip(c) {
                *b += beta * v;
            }
        }
        self.pending = Some(p);
        Ok(())
    }

    fn add_sub(&mut self, node: &NodeProto, dynamic_first: bool, other: &str) -> Result<(), NetworkError> {
        let c = self.float_constant(other, node)?.as_vector(self.width, &node.name)?;
        let width = self.width;
        let subtract = node.op_type == "Sub";
        if subtract && !dynamic_first {
            // c - x
            let p = self.pending.take().unwrap_or_else(|| Pending::identity(width)).negate(width);
            self.pending = Some(p);
            let p = self.pending_mut();
            p.bias.iter_mut().zip(&c).for_each(|(b, v)| *b += v);
        } else {
            let sign = if subtract { -1.0 } else { 1.0 };
            let p = self.pending_mut();
            p.bias.iter_mut().zip(&c).for_each(|(b, v)| *b += sign * v);
        }
        Ok(())
    }

    fn reshape(&mut self, node: &NodeProto) -> Result<(), NetworkError> {
        if node.op_type == "Reshape" {
            let shape = self.constant(&node.input[1], node)?;
            let dims: Vec<i64> = shape.values.iter().map(|&v| v as i64).collect();
            if !dims.contains(&-1) && !dims.contains(&0) {
                let product: i64 = dims.iter().product();
                if product != self.width as i64 {
                    return Err(NetworkError::Shape(format!(
                        "node {:?}: reshape to {dims:?} changes width {}",
                        node.name, self.width
                    )));
                }
            }
        }
        if self.pending.is_none() {
            self.layers.push(Layer::Reshape { width: self.width });
        }
        Ok(())
    }
}

/// Decodes an ONNX model into a [`Network`].
pub fn load_network(bytes: &[u8]) -> Result<Network, NetworkError> {
    let model = proto::ModelProto::decode(bytes)?;
    let graph = model.graph.as_ref().ok_or_else(|| NetworkError::Topology("model has no graph".into()))?;
    build(graph)
}

fn build(graph: &GraphProto) -> Result<Network, NetworkError> {
    let mut constants: HashMap<&str, Constant> = HashMap::new();
    for t in &graph.initializer {
        constants.insert(t.name.as_str(), decode_tensor(t)?);
    }
    for node in graph.node.iter().filter(|n| n.op_type == "Constant") {
        let t = node
            .attribute
            .iter()
            .find(|a| a.name == "value")
            .and_then(|a| a.t.as_ref())
            .ok_or_else(|| NetworkError::UnsupportedOperator {
                op: "Constant (non-tensor value)".into(),
                node: node.name.clone(),
            })?;
        let out = node.output.first().map(String::as_str).unwrap_or_default();
        constants.insert(out, decode_tensor(t)?);
    }

    let inputs: Vec<&ValueInfoProto> =
        graph.input.iter().filter(|v| !constants.contains_key(v.name.as_str())).collect();
    let input = match inputs.as_slice() {
        [one] => *one,
        [] => return Err(NetworkError::Topology("graph has no input".into())),
        _ => return Err(NetworkError::Topology(format!("graph has {} inputs", inputs.len()))),
    };
    let precision = match value_elem_type(input) {
        Some(proto::FLOAT) | None => Precision::F32,
        Some(proto::DOUBLE) => Precision::F64,
        Some(other) => return Err(NetworkError::NonFloatTensor { name: input.name.clone(), dtype: other }),
    };
    let n_inputs = value_width(input)
        .ok_or_else(|| NetworkError::Shape(format!("input {:?} has no declared shape", input.name)))?;

    let mut loader = Loader { constants, layers: Vec::new(), pending: None, width: n_inputs };
    let mut current = input.name.clone();
    for node in &graph.node {
        if node.op_type == "Constant" {
            continue;
        }
        let dynamic: Vec<(usize, &String)> = node
            .input
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_empty() && !loader.constants.contains_key(n.as_str()))
            .collect();
        let (slot, name) = match dynamic.as_slice() {
            [one] => *one,
            [] => {
                return Err(NetworkError::UnsupportedOperator {
                    op: format!("{} on constants only", node.op_type),
                    node: node.name.clone(),
                })
            }
            _ => {
                return Err(NetworkError::Topology(format!(
                    "node {:?} ({}) combines {} computed tensors; only single-path graphs are supported",
                    node.name,
                    node.op_type,
                    dynamic.len()
                )))
            }
        };
        if *name != current {
            return Err(NetworkError::Topology(format!(
                "node {:?} consumes {name:?}, which is not on the main path (at {current:?})",
                node.name
            )));
        }
        let other = |i: usize| node.input.get(i).cloned().unwrap_or_default();
        match node.op_type.as_str() {
            "MatMul" => loader.matmul(node, slot == 0, &other(1 - slot))?,
            "Gemm" if slot == 0 => loader.gemm(node)?,
            "Add" | "Sub" => loader.add_sub(node, slot == 0, &other(1 - slot))?,
            "Relu" | "Sigmoid" | "Tanh" => {
                loader.flush();
                loader.layers.push(Layer::Activation(match node.op_type.as_str() {
                    "Relu" => Activation::Relu,
                    "Sigmoid" => Activation::Sigmoid,
                    _ => Activation::Tanh,
                }));
            }
            "Flatten" | "Reshape" => loader.reshape(node)?,
            "Identity" => {}
            op => {
                return Err(NetworkError::UnsupportedOperator { op: op.to_string(), node: node.name.clone() })
            }
        }
        current = node
            .output
            .first()
            .cloned()
            .ok_or_else(|| NetworkError::Topology(format!("node {:?} has no output", node.name)))?;
    }
    loader.flush();

    match graph.output.as_slice() {
        [out] if out.name == current => {
            if let Some(w) = value_width(out) {
                if w != loader.width {
                    return Err(NetworkError::Shape(format!(
                        "declared output width {w} but the graph computes {}",
                        loader.width
                    )));
                }
            }
        }
        [out] => {
            return Err(NetworkError::Topology(format!(
                "graph output {:?} is not produced by the main path (ends at {current:?})",
                out.name
            )))
        }
        outs => return Err(NetworkError::Topology(format!("graph has {} outputs", outs.len()))),
    }
    Network::new(n_inputs, loader.layers, precision)
}

fn value_info(name: &str, width: usize, elem_type: i32) -> ValueInfoProto {
    ValueInfoProto {
        name: name.to_string(),
        r#type: Some(proto::TypeProto {
            tensor_type: Some(proto::TensorTypeProto {
                elem_type,
                shape: Some(proto::TensorShapeProto {
                    dim: vec![
                        proto::Dimension { dim_value: Some(1), dim_param: None },
                        proto::Dimension { dim_value: Some(width as i64), dim_param: None },
                    ],
                }),
            }),
        }),
    }
}

fn tensor(name: &str, dims: Vec<i64>, values: &[f64], precision: Precision) -> TensorProto {
    let mut t = TensorProto { name: name.to_string(), dims, ..Default::default() };
    match precision {
        Precision::F32 => {
            t.data_type = proto::FLOAT;
            t.float_data = values.iter().map(|&v| v as f32).collect();
        }
        Precision::F64 => {
            t.data_type = proto::DOUBLE;
            t.double_data = values.to_vec();
        }
    }
    t
}

fn node(op: &str, inputs: &[&str], output: &str) -> NodeProto {
    NodeProto {
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.to_string()],
        name: output.to_string(),
        op_type: op.to_string(),
        ..Default::default()
    }
}

/// Encodes a network as an ONNX model (`MatMul`+`Add` per affine layer). Used
/// to emit trivial overhead instances. `F32` networks are rounded to single
/// precision on the way out.
pub fn write_network(net: &Network) -> Vec<u8> {
    let elem = match net.precision {
        Precision::F32 => proto::FLOAT,
        Precision::F64 => proto::DOUBLE,
    };
    let mut graph = GraphProto { name: "network".into(), ..Default::default() };
    graph.input.push(value_info("input", net.n_inputs, elem));
    let mut current = "input".to_string();
    for (k, layer) in net.layers.iter().enumerate() {
        let out = format!("t{k}");
        match layer {
            Layer::Affine(a) => {
                let mut wt = vec![0.0; a.n_in * a.n_out];
                for o in 0..a.n_out {
                    for i in 0..a.n_in {
                        wt[i * a.n_out + o] = a.weights[o * a.n_in + i];
                    }
                }
                let (w_name, b_name, mm) = (format!("W{k}"), format!("B{k}"), format!("mm{k}"));
                graph.initializer.push(tensor(&w_name, vec![a.n_in as i64, a.n_out as i64], &wt, net.precision));
                graph.initializer.push(tensor(&b_name, vec![a.n_out as i64], &a.bias, net.precision));
                graph.node.push(node("MatMul", &[&current, &w_name], &mm));
                graph.node.push(node("Add", &[&mm, &b_name], &out));
            }
            Layer::Activation(act) => {
                let op = match act {
                    Activation::Relu => "Relu",
                    Activation::Sigmoid => "Sigmoid",
                    Activation::Tanh => "Tanh",
                };
                graph.node.push(node(op, &[&current], &out));
            }
            Layer::Reshape { .. } => graph.node.push(node("Flatten", &[&current], &out)),
        }
        current = out;
    }
    graph.node.push(node("Identity", &[&current], "output"));
    graph.output.push(value_info("output", net.n_outputs, elem));
    let model = proto::ModelProto {
        ir_version: 7,
        producer_name: "vnn-harness".into(),
        graph: Some(graph),
        opset_import: vec![proto::OperatorSetIdProto { domain: String::new(), version: 13 }],
    };
    model.encode_to_vec()
}
