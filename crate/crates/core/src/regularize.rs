//! Anti-collapse regularizers: random-label sigmoid cross-entropy through the
//! noise head, the minibatch variance hinge with an annealed threshold, and
//! the adaptive weight c_t that balances either one against the SVDD loss.

use std::fmt;

use rand::Rng;

use crate::tensor::{Graph, Tensor, TensorError};

pub type RegResult<T> = Result<T, RegError>;

/// c_t is clamped here when the regularizer loss vanishes.
pub const C_T_CAP: f64 = 1e6;
pub const DEFAULT_EPS_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum RegError {
    BatchTooSmall { rows: usize },
    NegativeLoss { l_svdd: f64, l_reg: f64 },
    InvalidConfig(String),
    Tensor(TensorError),
}

impl fmt::Display for RegError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BatchTooSmall { rows } => {
                write!(f, "variance regularizer needs at least 2 rows, got {rows}")
            }
            Self::NegativeLoss { l_svdd, l_reg } => {
                write!(f, "losses must be non-negative, got svdd {l_svdd}, reg {l_reg}")
            }
            Self::InvalidConfig(msg) => write!(f, "invalid regularizer config: {msg}"),
            Self::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RegError {}

impl From<TensorError> for RegError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    None,
    Noise,
    Variance,
}

impl RegKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Noise => "noise",
            Self::Variance => "variance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Self::None),
            "noise" => Some(Self::Noise),
            "variance" => Some(Self::Variance),
            _ => None,
        }
    }
}

/// Adaptive recurrence vs. the fixed c_t = 1 ablation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Adaptive,
    Fixed,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adaptive" => Some(Self::Adaptive),
            "fixed" => Some(Self::Fixed),
            _ => None,
        }
    }
}

/// Hyperparameters of one regularization run. Exactly one kind is active.
#[derive(Debug, Clone, PartialEq)]
pub struct RegConfig {
    pub kind: RegKind,
    /// Number of random-label tasks (noise kind).
    pub k: usize,
    /// Initial variance threshold (variance kind).
    pub d0: f64,
    /// Anneal period in epochs (variance kind).
    pub r: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Initial value of the running weight c_t.
    pub c0: f64,
    pub weighting: Weighting,
    pub eps_ratio: f64,
}

impl RegConfig {
    pub fn none() -> Self {
        Self {
            kind: RegKind::None,
            k: 30,
            d0: 0.1,
            r: 3,
            alpha: 0.9,
            beta: 0.5,
            c0: 0.0,
            weighting: Weighting::Adaptive,
            eps_ratio: DEFAULT_EPS_RATIO,
        }
    }

    pub fn validate(&self) -> RegResult<()> {
        if self.kind == RegKind::Noise && self.k == 0 {
            return Err(RegError::InvalidConfig("k must be positive".into()));
        }
        if self.kind == RegKind::Variance {
            if self.d0 <= 0.0 {
                return Err(RegError::InvalidConfig("d0 must be positive".into()));
            }
            if self.r == 0 {
                return Err(RegError::InvalidConfig("r must be positive".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RegError::InvalidConfig("alpha must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(RegError::InvalidConfig("beta must lie in [0, 1]".into()));
        }
        if self.c0 < 0.0 {
            return Err(RegError::InvalidConfig("c0 must be non-negative".into()));
        }
        if self.eps_ratio <= 0.0 {
            return Err(RegError::InvalidConfig("eps_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// Fresh uniform binary labels, one per (sample, task) pair.
pub fn sample_random_labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n * k)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
        .collect()
}

/// Mean sigmoid cross-entropy of logits against fixed binary labels, in the
/// overflow-free form max(z, 0) - z*y + log(1 + exp(-|z|)).
pub fn noise_reg_loss(g: &mut Graph, logits: Tensor, labels: &[f64]) -> RegResult<Tensor> {
    let shape = g.shape(logits).to_vec();
    let count: usize = shape.iter().product();
    if labels.len() != count {
        return Err(TensorError::ShapeMismatch {
            op: "noise_reg_loss",
            shapes: vec![shape, vec![labels.len()]],
        }
        .into());
    }
    let y = g.constant(&shape, labels.to_vec())?;
    let hinge = g.max_with_scalar(logits, 0.0);
    let zy = g.mul(logits, y)?;
    let linear = g.sub(hinge, zy)?;
    let abs_z = g.abs(logits);
    let neg_abs = g.mul_scalar(abs_z, -1.0);
    let e = g.exp(neg_abs);
    let ones = g.constant(&shape, vec![1.0; count])?;
    let one_plus = g.add_broadcast(ones, e)?;
    let softplus = g.log(one_plus);
    let per_element = g.add_broadcast(linear, softplus)?;
    Ok(g.mean(per_element))
}

/// Annealed variance threshold: d0 * 10^-floor(epoch / r).
pub fn variance_threshold(epoch: usize, d0: f64, r: usize) -> f64 {
    let steps = (epoch / r.max(1)) as i32;
    d0 * 10f64.powi(-steps)
}

/// Hinge on the minibatch feature variance: max{0, threshold - v} with v the
/// per-dimension sample variance averaged over dimensions.
pub fn variance_reg_loss(g: &mut Graph, features: Tensor, threshold: f64) -> RegResult<Tensor> {
    let shape = g.shape(features).to_vec();
    if shape.len() != 2 {
        return Err(TensorError::ShapeMismatch {
            op: "variance_reg_loss",
            shapes: vec![shape],
        }
        .into());
    }
    let (n, p) = (shape[0], shape[1]);
    if n < 2 {
        return Err(RegError::BatchTooSmall { rows: n });
    }
    let mean_weights = g.constant(&[1, n], vec![1.0 / n as f64; n])?;
    let col_means = g.matmul(mean_weights, features)?;
    let neg_means = g.mul_scalar(col_means, -1.0);
    let neg_means = g.reshape(neg_means, &[p])?;
    let centered = g.add_broadcast(features, neg_means)?;
    let sq = g.square(centered);
    let total = g.sum(sq);
    let v = g.div_scalar(total, (p * (n - 1)) as f64)?;
    let neg_v = g.mul_scalar(v, -1.0);
    let thr = g.constant(&[1], vec![threshold])?;
    let gap = g.add_broadcast(thr, neg_v)?;
    Ok(g.max_with_scalar(gap, 0.0))
}

/// Plain-value variance statistic, shared with the collapse monitor.
pub fn batch_variance(features: &[f64], n: usize, p: usize) -> f64 {
    assert!(n >= 2, "variance needs at least 2 rows");
    let mut means = vec![0.0; p];
    for i in 0..n {
        for q in 0..p {
            means[q] += features[i * p + q];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..n {
        for q in 0..p {
            let d = features[i * p + q] - means[q];
            total += d * d;
        }
    }
    total / (p * (n - 1)) as f64
}

/// Eq.-(7)-style update of the running weight from detached loss values,
/// with the denominator floored at eps_ratio and the result capped.
pub fn adaptive_weight_update(
    c_prev: f64,
    l_svdd: f64,
    l_reg: f64,
    alpha: f64,
    beta: f64,
    eps_ratio: f64,
) -> RegResult<f64> {
    if l_svdd < 0.0 || l_reg < 0.0 {
        return Err(RegError::NegativeLoss { l_svdd, l_reg });
    }
    let denom = l_reg.max(eps_ratio);
    let c_t = alpha * c_prev + beta * (1.0 - alpha) * (l_svdd / denom);
    Ok(c_t.min(C_T_CAP))
}

/// L_final = L_SVDD + c_t * L_reg with c_t held constant.
pub fn total_loss(g: &mut Graph, l_svdd: Tensor, l_reg: Tensor, c_t: f64) -> RegResult<Tensor> {
    let weighted = g.mul_scalar(l_reg, c_t);
    Ok(g.add_broadcast(l_svdd, weighted)?)
}
