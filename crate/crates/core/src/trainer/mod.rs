//! Deterministic training loop: per-iteration radius and weighting updates,
//! dual-learning-rate Adam, annealed variance threshold, collapse
//! monitoring, and validation-based model selection.

mod adam;

pub use adam::{adam_step, Moments, BETA1, BETA2, EPS};

use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ImageCorpus, Splits};
use crate::encoder::{
    bind_params, encode, head_logits, init_params, EncoderError, EncoderParams, EncoderSpec,
};
use crate::evalreport::{fmt_f64, roc_auc, EvalError, ScoredSet};
use crate::objective::{
    anomaly_score, init_center, squared_distances_values, svdd_loss, update_radius,
    weight_decay_term, ObjectiveError, RowLabel, SvddMode, SvddState,
};
use crate::regularize::{
    adaptive_weight_update, batch_variance, noise_reg_loss, sample_random_labels, total_loss,
    variance_reg_loss, variance_threshold, RegConfig, RegError, RegKind, Weighting,
};
use crate::tensor::{Graph, TensorError};

pub const METRICS_HEADER: &str =
    "epoch,iter,l_svdd,l_reg,c_t,R,threshold,collapse_metric,val_auc,collapsed";
const PROBE_MAX: usize = 100;

// stream 0 is reserved for parameter init (init_params derives it from the seed)
const SHUFFLE_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;

pub type TrainResult<T> = Result<T, TrainError>;

#[derive(Debug)]
pub enum TrainError {
    Config(String),
    /// Loss or gradient went non-finite; carries the log written so far.
    NonFinite {
        epoch: usize,
        iter: usize,
        detail: String,
        metrics_csv: String,
    },
    Encoder(EncoderError),
    Objective(ObjectiveError),
    Reg(RegError),
    Eval(EvalError),
    Tensor(TensorError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "invalid training config: {msg}"),
            Self::NonFinite { epoch, iter, detail, .. } => {
                write!(f, "non-finite value at epoch {epoch} iteration {iter}: {detail}")
            }
            Self::Encoder(e) => write!(f, "{e}"),
            Self::Objective(e) => write!(f, "{e}"),
            Self::Reg(e) => write!(f, "{e}"),
            Self::Eval(e) => write!(f, "{e}"),
            Self::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<EncoderError> for TrainError {
    fn from(e: EncoderError) -> Self {
        Self::Encoder(e)
    }
}
impl From<ObjectiveError> for TrainError {
    fn from(e: ObjectiveError) -> Self {
        Self::Objective(e)
    }
}
impl From<RegError> for TrainError {
    fn from(e: RegError) -> Self {
        Self::Reg(e)
    }
}
impl From<EvalError> for TrainError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}
impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub encoder: EncoderSpec,
    pub mode: SvddMode,
    pub nu: f64,
    pub eta: f64,
    pub reg: RegConfig,
    pub lr: f64,
    pub lr_head: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub collapse_tau: f64,
    pub center_floor: f64,
    pub eps_inv: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> TrainResult<()> {
        self.encoder.validate()?;
        self.reg.validate()?;
        if self.lr <= 0.0 || self.lr_head <= 0.0 {
            return Err(TrainError::Config("learning rates must be positive".into()));
        }
        if self.weight_decay <= 0.0 {
            return Err(TrainError::Config("weight decay must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch size must be at least 2".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be positive".into()));
        }
        if self.collapse_tau <= 0.0 {
            return Err(TrainError::Config("collapse_tau must be positive".into()));
        }
        if self.reg.kind == RegKind::Noise && self.encoder.noise_head_k.is_none() {
            return Err(TrainError::Config("noise regularizer needs a noise head".into()));
        }
        Ok(())
    }
}

/// Per-epoch diagnostics mirrored into the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub val_auc: f64,
    pub collapse_metric: f64,
    pub collapsed: bool,
}

/// A completed training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub final_params: EncoderParams,
    pub final_state: SvddState,
    pub best_params: EncoderParams,
    pub best_state: SvddState,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub epochs: Vec<EpochStats>,
    pub metrics_csv: String,
}

impl TrainRun {
    pub fn any_collapsed(&self) -> bool {
        self.epochs.iter().any(|e| e.collapsed)
    }
}

/// Mean per-dimension sample variance of a feature batch; near zero means
/// the encoder maps everything to one point.
pub fn collapse_metric(features: &[f64], n: usize, p: usize) -> TrainResult<f64> {
    if n < 2 {
        return Err(TrainError::Config(format!(
            "collapse metric needs at least 2 rows, got {n}"
        )));
    }
    Ok(batch_variance(features, n, p))
}

fn gather_rows(corpus: &ImageCorpus, indices: &[usize]) -> Vec<f64> {
    let d = corpus.input_dim();
    let mut out = Vec::with_capacity(indices.len() * d);
    for &idx in indices {
        out.extend(corpus.image(idx).iter().map(|&v| v as f64));
    }
    out
}

/// Forward a set of corpus rows without gradients, chunked to bound memory.
fn forward_features(
    spec: &EncoderSpec,
    params: &EncoderParams,
    corpus: &ImageCorpus,
    indices: &[usize],
    chunk: usize,
) -> TrainResult<Vec<f64>> {
    let p = spec.feature_dim();
    let mut features = Vec::with_capacity(indices.len() * p);
    for part in indices.chunks(chunk.max(1)) {
        let rows = gather_rows(corpus, part);
        let mut g = Graph::new();
        let x = g.constant(&[part.len(), spec.input_dim], rows)?;
        let bound = bind_params(&mut g, params, false);
        let feats = encode(&mut g, spec, &bound, x)?;
        features.extend_from_slice(g.values(feats));
    }
    Ok(features)
}

struct MetricsLog {
    csv: String,
}

impl MetricsLog {
    fn new() -> Self {
        Self {
            csv: format!("{METRICS_HEADER}\n"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn iteration(
        &mut self,
        epoch: usize,
        iter: usize,
        l_svdd: f64,
        l_reg: Option<f64>,
        c_t: Option<f64>,
        radius: Option<f64>,
        threshold: Option<f64>,
    ) {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        self.csv.push_str(&format!(
            "{epoch},{iter},{},{},{},{},{},,,\n",
            fmt_f64(l_svdd),
            opt(l_reg),
            opt(c_t),
            opt(radius),
            opt(threshold),
        ));
    }

    fn epoch(&mut self, stats: &EpochStats) {
        self.csv.push_str(&format!(
            "{},,,,,,,{},{},{}\n",
            stats.epoch,
            fmt_f64(stats.collapse_metric),
            fmt_f64(stats.val_auc),
            stats.collapsed,
        ));
    }
}

/// Run the full optimization loop over prebuilt splits.
pub fn train(
    config: &TrainConfig,
    corpus: &ImageCorpus,
    splits: &Splits,
) -> TrainResult<TrainRun> {
    config.validate()?;
    let spec = &config.encoder;
    if spec.input_dim != corpus.input_dim() {
        return Err(TrainError::Config(format!(
            "encoder input dim {} does not match corpus dim {}",
            spec.input_dim,
            corpus.input_dim()
        )));
    }
    if splits.train.is_empty() {
        return Err(TrainError::Config("empty train split".into()));
    }
    if splits.val.len() < 2 {
        return Err(TrainError::Config("validation split needs at least 2 rows".into()));
    }
    let has_labeled = splits
        .train_labels
        .iter()
        .any(|l| *l != RowLabel::Unlabeled);
    if has_labeled && config.mode != SvddMode::SemiSupervised {
        return Err(TrainError::Objective(ObjectiveError::LabelsInUnsupervisedMode));
    }

    let mut params = init_params(spec, config.seed)?;
    let mut shuffle_rng: ChaCha8Rng = crate::stream_rng(config.seed, SHUFFLE_STREAM);
    let mut label_rng: ChaCha8Rng = crate::stream_rng(config.seed, LABEL_STREAM);

    // center from an initial forward pass over the unlabeled/normal part of
    // the train split; labeled anomalies must not pull the center
    let center_indices: Vec<usize> = splits
        .train
        .iter()
        .zip(&splits.train_labels)
        .filter(|(_, l)| **l != RowLabel::Anomaly)
        .map(|(i, _)| *i)
        .collect();
    let center_feats = forward_features(spec, &params, corpus, &center_indices, config.batch_size)?;
    let p = spec.feature_dim();
    let center = init_center(&center_feats, center_indices.len(), p, config.center_floor)?;
    let mut state = SvddState::new(center, config.mode, config.nu, config.eta)?;
    state.eps_inv = config.eps_inv;

    // fixed held-out probe batch for the collapse metric
    let probe: Vec<usize> = splits.val.iter().take(PROBE_MAX).copied().collect();
    if probe.len() < 2 {
        return Err(TrainError::Config("probe batch needs at least 2 rows".into()));
    }

    let mut moments: Vec<Moments> = params
        .params
        .iter()
        .map(|p| Moments::zeros(p.values.len()))
        .collect();
    let mut c_t = config.reg.c0;
    let mut t = 0usize;
    let mut log = MetricsLog::new();
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, EncoderParams, SvddState)> = None;
    let mut best_any: Option<(f64, usize, EncoderParams, SvddState)> = None;

    let positions: Vec<usize> = (0..splits.train.len()).collect();
    for epoch in 0..config.max_epochs {
        let mut order = positions.clone();
        order.shuffle(&mut shuffle_rng);
        let threshold = if config.reg.kind == RegKind::Variance {
            Some(variance_threshold(epoch, config.reg.d0, config.reg.r))
        } else {
            None
        };

        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue; // variance and collapse statistics need >= 2 rows
            }
            t += 1;
            let indices: Vec<usize> = batch.iter().map(|&pos| splits.train[pos]).collect();
            let labels: Vec<RowLabel> = batch.iter().map(|&pos| splits.train_labels[pos]).collect();
            let rows = gather_rows(corpus, &indices);

            let mut g = Graph::new();
            let x = g.constant(&[indices.len(), spec.input_dim], rows)?;
            let bound = bind_params(&mut g, &params, true);
            let feats = encode(&mut g, spec, &bound, x)?;

            if config.mode == SvddMode::SoftBoundary {
                let d2 = squared_distances_values(g.values(feats), indices.len(), &state.center);
                let dists: Vec<f64> = d2.iter().map(|v| v.sqrt()).collect();
                state.radius = update_radius(&dists, config.nu)?;
            }

            let decayed: Vec<_> = params
                .params
                .iter()
                .zip(&bound.tensors)
                .filter(|(p, _)| p.kind.is_decayed())
                .map(|(_, t)| *t)
                .collect();
            let wd = weight_decay_term(&mut g, &decayed, config.weight_decay);
            let label_arg = if config.mode == SvddMode::SemiSupervised {
                Some(labels.as_slice())
            } else {
                None
            };
            let l_svdd = svdd_loss(&mut g, feats, &state, label_arg, Some(wd))?;
            let l_svdd_val = g.scalar_value(l_svdd);

            let (total, l_reg_val, c_used) = match config.reg.kind {
                RegKind::None => (l_svdd, None, None),
                RegKind::Noise => {
                    let k = spec.noise_head_k.expect("validated");
                    let labels = sample_random_labels(indices.len(), k, &mut label_rng);
                    let logits = head_logits(&mut g, spec, &bound, feats)?;
                    let l_reg = noise_reg_loss(&mut g, logits, &labels)?;
                    let l_reg_val = g.scalar_value(l_reg);
                    c_t = next_weight(&config.reg, c_t, l_svdd_val, l_reg_val)?;
                    let total = total_loss(&mut g, l_svdd, l_reg, c_t)?;
                    (total, Some(l_reg_val), Some(c_t))
                }
                RegKind::Variance => {
                    let l_reg =
                        variance_reg_loss(&mut g, feats, threshold.expect("variance threshold"))?;
                    let l_reg_val = g.scalar_value(l_reg);
                    c_t = next_weight(&config.reg, c_t, l_svdd_val, l_reg_val)?;
                    let total = total_loss(&mut g, l_svdd, l_reg, c_t)?;
                    (total, Some(l_reg_val), Some(c_t))
                }
            };

            let total_val = g.scalar_value(total);
            if !total_val.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    iter: t,
                    detail: format!("loss {total_val}"),
                    metrics_csv: log.csv,
                });
            }
            g.backward(total)?;
            for ((param, moment), tensor) in
                params.params.iter_mut().zip(&mut moments).zip(&bound.tensors)
            {
                let lr = if param.kind.is_head() {
                    config.lr_head
                } else {
                    config.lr
                };
                if let Err(flat) = adam_step(&mut param.values, g.grad(*tensor), moment, lr, t) {
                    return Err(TrainError::NonFinite {
                        epoch,
                        iter: t,
                        detail: format!("gradient of {} at flat index {flat}", param.name),
                        metrics_csv: log.csv,
                    });
                }
            }

            let radius_col = (config.mode == SvddMode::SoftBoundary).then_some(state.radius);
            log.iteration(epoch, t, l_svdd_val, l_reg_val, c_used, radius_col, threshold);
        }

        // epoch end: validation AUC, collapse metric, model selection
        let val_feats = forward_features(spec, &params, corpus, &splits.val, config.batch_size)?;
        let val_scores = anomaly_score(&val_feats, splits.val.len(), &state);
        let val_auc = roc_auc(&ScoredSet::new(val_scores, splits.val_truth.clone())?)?;

        let probe_feats = forward_features(spec, &params, corpus, &probe, config.batch_size)?;
        let metric = collapse_metric(&probe_feats, probe.len(), p)?;
        let stats = EpochStats {
            epoch,
            val_auc,
            collapse_metric: metric,
            collapsed: metric < config.collapse_tau,
        };
        log.epoch(&stats);

        let better = |cur: &Option<(f64, usize, EncoderParams, SvddState)>| {
            cur.as_ref().map(|(auc, _, _, _)| val_auc > *auc).unwrap_or(true)
        };
        if better(&best_any) {
            best_any = Some((val_auc, epoch, params.clone(), state.clone()));
        }
        if !stats.collapsed && better(&best) {
            best = Some((val_auc, epoch, params.clone(), state.clone()));
        }
        epochs.push(stats);
    }

    // best model among non-collapsed epochs; if every epoch collapsed, fall
    // back to the overall best
    let (best_val_auc, best_epoch, best_params, best_state) =
        best.or(best_any).expect("at least one epoch ran");

    Ok(TrainRun {
        final_params: params,
        final_state: state,
        best_params,
        best_state,
        best_epoch,
        best_val_auc,
        epochs,
        metrics_csv: log.csv,
    })
}

fn next_weight(reg: &RegConfig, c_prev: f64, l_svdd: f64, l_reg: f64) -> TrainResult<f64> {
    match reg.weighting {
        Weighting::Fixed => Ok(1.0),
        Weighting::Adaptive => Ok(adaptive_weight_update(
            c_prev,
            l_svdd,
            l_reg,
            reg.alpha,
            reg.beta,
            reg.eps_ratio,
        )?),
    }
}

/// Parsed iteration row of a metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRow {
    pub epoch: usize,
    pub iter: usize,
    pub l_svdd: f64,
    pub l_reg: Option<f64>,
    pub c_t: Option<f64>,
    pub radius: Option<f64>,
    pub threshold: Option<f64>,
}

/// Iteration rows of a metrics CSV, in order.
pub fn parse_iteration_rows(metrics_csv: &str) -> Result<Vec<IterRow>, String> {
    let mut rows = Vec::new();
    for (lineno, line) in metrics_csv.lines().enumerate() {
        if lineno == 0 {
            if line != METRICS_HEADER {
                return Err(format!("unexpected header: {line}"));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format!("line {}: expected 10 fields", lineno + 1));
        }
        if fields[1].is_empty() {
            continue; // epoch summary row
        }
        let req = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", lineno + 1));
        let opt = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s).map(Some)
            }
        };
        rows.push(IterRow {
            epoch: fields[0].parse().map_err(|_| format!("line {}: bad epoch", lineno + 1))?,
            iter: fields[1].parse().map_err(|_| format!("line {}: bad iter", lineno + 1))?,
            l_svdd: req(fields[2])?,
            l_reg: opt(fields[3])?,
            c_t: opt(fields[4])?,
            radius: opt(fields[5])?,
            threshold: opt(fields[6])?,
        });
    }
    Ok(rows)
}

/// Recompute the c_t column of a logged adaptive run from its (l_svdd,
/// l_reg) columns; returns the recomputed sequence paired with the logged
/// one.
pub fn replay_weight_column(
    metrics_csv: &str,
    reg: &RegConfig,
) -> Result<Vec<(f64, f64)>, String> {
    let rows = parse_iteration_rows(metrics_csv)?;
    let mut c = reg.c0;
    let mut out = Vec::new();
    for row in rows {
        let (Some(l_reg), Some(logged)) = (row.l_reg, row.c_t) else {
            return Err(format!("iteration {} lacks regularizer columns", row.iter));
        };
        c = match reg.weighting {
            Weighting::Fixed => 1.0,
            Weighting::Adaptive => {
                adaptive_weight_update(c, row.l_svdd, l_reg, reg.alpha, reg.beta, reg.eps_ratio)
                    .map_err(|e| e.to_string())?
            }
        };
        out.push((logged, c));
    }
    Ok(out)
}
