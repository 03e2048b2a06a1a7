//! Fully connected feature encoder with a per-network bias toggle and
//! activation choice, plus the optional linear noise head used by the
//! random-label regularizer.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Graph, Tensor, TensorError};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

pub type EncoderResult<T> = Result<T, EncoderError>;

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderError {
    InvalidSpec(String),
    /// head_logits called but the spec has no noise head.
    HeadAbsent,
    EmptyBatch,
    Tensor(TensorError),
}

impl fmt::Display for EncoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidSpec(msg) => write!(f, "invalid encoder spec: {msg}"),
            Self::HeadAbsent => write!(f, "encoder has no noise head configured"),
            Self::EmptyBatch => write!(f, "batch must contain at least one row"),
            Self::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EncoderError {}

impl From<TensorError> for EncoderError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

/// Hidden-layer activation. The final feature layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::LeakyRelu => "leaky_relu",
            Self::Tanh => "tanh",
            Self::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Self::Relu),
            "leaky_relu" => Some(Self::LeakyRelu),
            "tanh" => Some(Self::Tanh),
            "sigmoid" => Some(Self::Sigmoid),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> f64 {
        match self {
            Self::Relu => 0.0,
            Self::LeakyRelu => 1.0,
            Self::Tanh => 2.0,
            Self::Sigmoid => 3.0,
        }
    }

    pub(crate) fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            0 => Some(Self::Relu),
            1 => Some(Self::LeakyRelu),
            2 => Some(Self::Tanh),
            3 => Some(Self::Sigmoid),
            _ => None,
        }
    }

    fn apply(self, g: &mut Graph, x: Tensor) -> Tensor {
        match self {
            Self::Relu => g.relu(x),
            Self::LeakyRelu => g.leaky_relu(x, LEAKY_RELU_SLOPE),
            Self::Tanh => g.tanh(x),
            Self::Sigmoid => g.sigmoid(x),
        }
    }
}

/// Shape of the encoder: input dim d, layer widths ending in the feature
/// dim p, one bias toggle and one activation for the whole network, and an
/// optional k-output linear noise head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    pub use_bias: bool,
    pub activation: Activation,
    pub noise_head_k: Option<usize>,
}

impl EncoderSpec {
    pub fn feature_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len()
    }

    pub fn validate(&self) -> EncoderResult<()> {
        if self.input_dim == 0 {
            return Err(EncoderError::InvalidSpec("input_dim must be positive".into()));
        }
        if self.layer_widths.is_empty() {
            return Err(EncoderError::InvalidSpec("layer_widths must be non-empty".into()));
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return Err(EncoderError::InvalidSpec("layer widths must be positive".into()));
        }
        if self.noise_head_k == Some(0) {
            return Err(EncoderError::InvalidSpec("noise head k must be positive".into()));
        }
        Ok(())
    }

    /// (fan_in, fan_out) of layer l.
    fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 {
            self.input_dim
        } else {
            self.layer_widths[l - 1]
        };
        (fan_in, self.layer_widths[l])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight { layer: usize },
    Bias { layer: usize },
    HeadWeight,
    HeadBias,
}

impl ParamKind {
    /// Head parameters take the separate head learning rate.
    pub fn is_head(self) -> bool {
        matches!(self, Self::HeadWeight | Self::HeadBias)
    }

    /// Weight-decay covers weight matrices only, never biases.
    pub fn is_decayed(self) -> bool {
        matches!(self, Self::Weight { .. } | Self::HeadWeight)
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// All trainable tensors, in a fixed order shared by graph binding, gradient
/// readout, optimizer state, and checkpoints.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub params: Vec<Param>,
}

impl EncoderParams {
    pub fn find(&self, kind: ParamKind) -> Option<&Param> {
        self.params.iter().find(|p| p.kind == kind)
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.values.iter().all(|v| v.is_finite()))
    }
}

/// Graph handles for one binding of [`EncoderParams`], parallel to
/// `params.params`.
pub struct BoundParams {
    pub tensors: Vec<Tensor>,
    kinds: Vec<ParamKind>,
}

impl BoundParams {
    fn get(&self, kind: ParamKind) -> Option<Tensor> {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map(|i| self.tensors[i])
    }
}

/// Deterministic init: encoder weights uniform in [-s, s] with
/// s = sqrt(6 / (fan_in + fan_out)), biases zero. The noise head starts at
/// exactly zero so its first logits are zero and the random-label loss opens
/// at log 2.
pub fn init_params(spec: &EncoderSpec, seed: u64) -> EncoderResult<EncoderParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let values: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-s..=s))
            .collect();
        params.push(Param {
            name: format!("enc.w{l}"),
            kind: ParamKind::Weight { layer: l },
            shape: vec![fan_in, fan_out],
            values,
        });
        if spec.use_bias {
            params.push(Param {
                name: format!("enc.b{l}"),
                kind: ParamKind::Bias { layer: l },
                shape: vec![fan_out],
                values: vec![0.0; fan_out],
            });
        }
    }
    if let Some(k) = spec.noise_head_k {
        let p = spec.feature_dim();
        params.push(Param {
            name: "head.w".into(),
            kind: ParamKind::HeadWeight,
            shape: vec![p, k],
            values: vec![0.0; p * k],
        });
        params.push(Param {
            name: "head.b".into(),
            kind: ParamKind::HeadBias,
            shape: vec![k],
            values: vec![0.0; k],
        });
    }
    Ok(EncoderParams { params })
}

/// Insert every parameter into the graph as a leaf.
pub fn bind_params(g: &mut Graph, params: &EncoderParams, requires_grad: bool) -> BoundParams {
    let mut tensors = Vec::with_capacity(params.params.len());
    let mut kinds = Vec::with_capacity(params.params.len());
    for p in &params.params {
        let t = g
            .leaf(&p.shape, p.values.clone(), requires_grad)
            .expect("param shape matches values");
        tensors.push(t);
        kinds.push(p.kind);
    }
    BoundParams { tensors, kinds }
}

/// phi(x; W): affine (+bias when enabled) then activation on hidden layers,
/// final layer affine only.
pub fn encode(
    g: &mut Graph,
    spec: &EncoderSpec,
    bound: &BoundParams,
    x_batch: Tensor,
) -> EncoderResult<Tensor> {
    let shape = g.shape(x_batch).to_vec();
    if shape.len() != 2 || shape[1] != spec.input_dim {
        return Err(TensorError::ShapeMismatch {
            op: "encode",
            shapes: vec![shape, vec![spec.input_dim]],
        }
        .into());
    }
    if shape[0] == 0 {
        return Err(EncoderError::EmptyBatch);
    }
    let last = spec.num_layers() - 1;
    let mut h = x_batch;
    for l in 0..spec.num_layers() {
        let w = bound
            .get(ParamKind::Weight { layer: l })
            .expect("bound params match spec");
        h = g.matmul(h, w)?;
        if spec.use_bias {
            let b = bound
                .get(ParamKind::Bias { layer: l })
                .expect("bound params match spec");
            h = g.add_broadcast(h, b)?;
        }
        if l != last {
            h = spec.activation.apply(g, h);
        }
    }
    Ok(h)
}

/// z(x; W) = g(phi(x)): the affine noise head over features.
pub fn head_logits(
    g: &mut Graph,
    spec: &EncoderSpec,
    bound: &BoundParams,
    features: Tensor,
) -> EncoderResult<Tensor> {
    if spec.noise_head_k.is_none() {
        return Err(EncoderError::HeadAbsent);
    }
    let shape = g.shape(features).to_vec();
    if shape.first() == Some(&0) {
        return Err(EncoderError::EmptyBatch);
    }
    let w = bound.get(ParamKind::HeadWeight).ok_or(EncoderError::HeadAbsent)?;
    let b = bound.get(ParamKind::HeadBias).ok_or(EncoderError::HeadAbsent)?;
    let z = g.matmul(features, w)?;
    Ok(g.add_broadcast(z, b)?)
}

/// Forward a raw batch through the encoder without tracking gradients.
pub fn encode_values(
    spec: &EncoderSpec,
    params: &EncoderParams,
    rows: &[f64],
    n: usize,
) -> EncoderResult<Vec<f64>> {
    let mut g = Graph::new();
    let x = g.constant(&[n, spec.input_dim], rows.to_vec())?;
    let bound = bind_params(&mut g, params, false);
    let feats = encode(&mut g, spec, &bound, x)?;
    Ok(g.values(feats).to_vec())
}
