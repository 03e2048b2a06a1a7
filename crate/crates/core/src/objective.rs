//! The three deep SVDD objectives, center initialization, the per-iteration
//! radius quantile, and anomaly scoring.

use std::fmt;

use crate::tensor::{Graph, Tensor, TensorError};

pub type ObjectiveResult<T> = Result<T, ObjectiveError>;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveError {
    NonFiniteFeatures,
    EmptyBatch,
    /// Labeled rows passed to soft_boundary or one_class.
    LabelsInUnsupervisedMode,
    LabelCountMismatch { rows: usize, labels: usize },
    InvalidState(String),
    Tensor(TensorError),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFiniteFeatures => write!(f, "features contain non-finite values"),
            Self::EmptyBatch => write!(f, "batch must contain at least one row"),
            Self::LabelsInUnsupervisedMode => {
                write!(f, "labeled rows passed to an unsupervised objective")
            }
            Self::LabelCountMismatch { rows, labels } => {
                write!(f, "{labels} labels for {rows} rows")
            }
            Self::InvalidState(msg) => write!(f, "invalid svdd state: {msg}"),
            Self::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ObjectiveError {}

impl From<TensorError> for ObjectiveError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvddMode {
    SoftBoundary,
    OneClass,
    SemiSupervised,
}

impl SvddMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::SoftBoundary => "soft_boundary",
            Self::OneClass => "one_class",
            Self::SemiSupervised => "semi_supervised",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "soft_boundary" => Some(Self::SoftBoundary),
            "one_class" => Some(Self::OneClass),
            "semi_supervised" => Some(Self::SemiSupervised),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> f64 {
        match self {
            Self::SoftBoundary => 0.0,
            Self::OneClass => 1.0,
            Self::SemiSupervised => 2.0,
        }
    }

    pub(crate) fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            0 => Some(Self::SoftBoundary),
            1 => Some(Self::OneClass),
            2 => Some(Self::SemiSupervised),
            _ => None,
        }
    }
}

/// Per-row training annotation for the semi-supervised objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Unlabeled,
    /// Labeled normal, y = +1.
    Normal,
    /// Labeled anomaly, y = -1.
    Anomaly,
}

/// Center, radius and mode of the hypersphere objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SvddState {
    pub center: Vec<f64>,
    /// Radius; meaningful in soft_boundary mode only.
    pub radius: f64,
    pub mode: SvddMode,
    pub nu: f64,
    pub eta: f64,
    /// Guard added inside the inverted distance term for labeled anomalies.
    pub eps_inv: f64,
}

pub const DEFAULT_EPS_INV: f64 = 1e-6;
pub const DEFAULT_CENTER_FLOOR: f64 = 0.1;

impl SvddState {
    pub fn new(center: Vec<f64>, mode: SvddMode, nu: f64, eta: f64) -> ObjectiveResult<Self> {
        let state = Self {
            center,
            radius: 0.0,
            mode,
            nu,
            eta,
            eps_inv: DEFAULT_EPS_INV,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> ObjectiveResult<()> {
        if self.center.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::InvalidState("center must be finite".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(ObjectiveError::InvalidState(format!(
                "nu must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if self.eta <= 0.0 {
            return Err(ObjectiveError::InvalidState(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.radius < 0.0 {
            return Err(ObjectiveError::InvalidState("radius must be non-negative".into()));
        }
        Ok(())
    }
}

/// Column mean of an initial forward pass, with small coordinates pushed to
/// +/- floor so the center is never (close to) the trivial all-zero point.
/// sign(0) counts as +1.
pub fn init_center(features: &[f64], n: usize, p: usize, floor: f64) -> ObjectiveResult<Vec<f64>> {
    if n == 0 || p == 0 {
        return Err(ObjectiveError::EmptyBatch);
    }
    if floor <= 0.0 {
        return Err(ObjectiveError::InvalidState(format!(
            "center floor must be positive, got {floor}"
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFiniteFeatures);
    }
    let mut center = vec![0.0; p];
    for i in 0..n {
        for q in 0..p {
            center[q] += features[i * p + q];
        }
    }
    for c in &mut center {
        *c /= n as f64;
        if c.abs() < floor {
            *c = if *c < 0.0 { -floor } else { floor };
        }
    }
    Ok(center)
}

/// Differentiable per-row squared Euclidean distance to the (constant)
/// center: a [n] tensor.
pub fn squared_distances(
    g: &mut Graph,
    features: Tensor,
    center: &[f64],
) -> ObjectiveResult<Tensor> {
    let shape = g.shape(features).to_vec();
    if shape.len() != 2 || shape[1] != center.len() {
        return Err(TensorError::ShapeMismatch {
            op: "squared_distances",
            shapes: vec![shape, vec![center.len()]],
        }
        .into());
    }
    let (n, p) = (shape[0], shape[1]);
    if n == 0 {
        return Err(ObjectiveError::EmptyBatch);
    }
    let neg_center = g.constant(&[p], center.iter().map(|c| -c).collect())?;
    let diff = g.add_broadcast(features, neg_center)?;
    let sq = g.square(diff);
    let ones = g.constant(&[p, 1], vec![1.0; p])?;
    let row_sums = g.matmul(sq, ones)?;
    Ok(g.reshape(row_sums, &[n])?)
}

/// Plain-value squared distances, for scoring and radius updates.
pub fn squared_distances_values(features: &[f64], n: usize, center: &[f64]) -> Vec<f64> {
    let p = center.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for q in 0..p {
            let d = features[i * p + q] - center[q];
            acc += d * d;
        }
        out.push(acc);
    }
    out
}

/// R as the (1-nu)-th lower empirical quantile of Euclidean distances:
/// sorted ascending, 1-based index ceil((1-nu) * n) clamped to at least 1.
/// The result is a constant with respect to gradients.
pub fn update_radius(distances: &[f64], nu: f64) -> ObjectiveResult<f64> {
    if distances.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(ObjectiveError::InvalidState(format!(
            "nu must lie in (0, 1], got {nu}"
        )));
    }
    let n = distances.len();
    let index = ((1.0 - nu) * n as f64).ceil() as usize;
    let index = index.max(1);
    let mut work = distances.to_vec();
    let (_, r, _) = work.select_nth_unstable_by(index - 1, |a, b| a.total_cmp(b));
    Ok(*r)
}

/// Mode-dependent SVDD loss over a feature batch. `weight_decay` (if given)
/// is added on top; the soft-boundary radius comes frozen from `state`.
pub fn svdd_loss(
    g: &mut Graph,
    features: Tensor,
    state: &SvddState,
    labels: Option<&[RowLabel]>,
    weight_decay: Option<Tensor>,
) -> ObjectiveResult<Tensor> {
    state.validate()?;
    let n = g.shape(features)[0];
    if n == 0 {
        return Err(ObjectiveError::EmptyBatch);
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(ObjectiveError::LabelCountMismatch {
                rows: n,
                labels: l.len(),
            });
        }
    }
    let d2 = squared_distances(g, features, &state.center)?;
    let mut loss = match state.mode {
        SvddMode::OneClass | SvddMode::SoftBoundary => {
            let labeled = labels
                .map(|l| l.iter().any(|x| *x != RowLabel::Unlabeled))
                .unwrap_or(false);
            if labeled {
                return Err(ObjectiveError::LabelsInUnsupervisedMode);
            }
            match state.mode {
                SvddMode::OneClass => g.mean(d2),
                SvddMode::SoftBoundary => {
                    let r_sq = state.radius * state.radius;
                    let shift = g.constant(&[n], vec![r_sq; n])?;
                    let over = g.sub(d2, shift)?;
                    let hinge = g.max_with_scalar(over, 0.0);
                    let total = g.sum(hinge);
                    let scaled = g.mul_scalar(total, 1.0 / (state.nu * n as f64));
                    let r_term = g.scalar(r_sq);
                    g.add_broadcast(scaled, r_term)?
                }
                SvddMode::SemiSupervised => unreachable!(),
            }
        }
        SvddMode::SemiSupervised => {
            let labels = labels.unwrap_or(&[]);
            if labels.len() != n {
                return Err(ObjectiveError::LabelCountMismatch {
                    rows: n,
                    labels: labels.len(),
                });
            }
            let mask_of = |want: RowLabel| -> Vec<f64> {
                labels
                    .iter()
                    .map(|l| if *l == want { 1.0 } else { 0.0 })
                    .collect()
            };
            let total = n as f64;
            let u_mask = g.constant(&[n], mask_of(RowLabel::Unlabeled))?;
            let pos_mask = g.constant(&[n], mask_of(RowLabel::Normal))?;
            let neg_mask = g.constant(&[n], mask_of(RowLabel::Anomaly))?;
            let unlabeled = g.mul(d2, u_mask)?;
            let unlabeled_sum = g.sum(unlabeled);
            let unlabeled_term = g.mul_scalar(unlabeled_sum, 1.0 / total);

            let pos = g.mul(d2, pos_mask)?;
            let pos_sum = g.sum(pos);
            // eps is added to every row before inverting (rows with d2 = 0
            // would otherwise produce inf * 0 = NaN under the mask), but only
            // anomaly rows survive the mask
            let eps = g.constant(&[n], vec![state.eps_inv; n])?;
            let guarded = g.add_broadcast(d2, eps)?;
            let inv = g.recip(guarded);
            let neg = g.mul(inv, neg_mask)?;
            let neg_sum = g.sum(neg);
            let labeled_sum = g.add_broadcast(pos_sum, neg_sum)?;
            let labeled_term = g.mul_scalar(labeled_sum, state.eta / total);
            g.add_broadcast(unlabeled_term, labeled_term)?
        }
    };
    if let Some(wd) = weight_decay {
        loss = g.add_broadcast(loss, wd)?;
    }
    Ok(loss)
}

/// (lambda / 2) * sum of squared Frobenius norms of the given weight
/// tensors. Bias vectors must not be passed here.
pub fn weight_decay_term(g: &mut Graph, weights: &[Tensor], lambda: f64) -> Tensor {
    let mut acc = g.scalar(0.0);
    for &w in weights {
        let sq = g.square(w);
        let s = g.sum(sq);
        acc = g.add_broadcast(acc, s).expect("scalar add");
    }
    g.mul_scalar(acc, lambda / 2.0)
}

/// Anomaly scores from raw feature values: squared distance to the center,
/// shifted by -R^2 in soft-boundary mode.
pub fn anomaly_score(features: &[f64], n: usize, state: &SvddState) -> Vec<f64> {
    let mut scores = squared_distances_values(features, n, &state.center);
    if state.mode == SvddMode::SoftBoundary {
        let r_sq = state.radius * state.radius;
        for s in &mut scores {
            *s -= r_sq;
        }
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(mode: SvddMode, center: Vec<f64>) -> SvddState {
        SvddState::new(center, mode, 0.25, 1.0).unwrap()
    }

    #[test]
    fn center_is_column_mean() {
        let c = init_center(&[0.0, 2.0, 2.0, 0.0], 2, 2, 0.1).unwrap();
        assert_eq!(c, vec![1.0, 1.0]);
    }

    #[test]
    fn center_of_identical_rows_is_that_row() {
        // dyadic values keep the mean exact in f64
        let v = [0.5, -0.75, 1.25];
        let rows: Vec<f64> = v.iter().chain(&v).chain(&v).copied().collect();
        let c = init_center(&rows, 3, 3, 0.1).unwrap();
        assert_eq!(c, v.to_vec());
    }

    #[test]
    fn center_floor_applies_with_positive_sign_at_zero() {
        let c = init_center(&[0.0; 6], 2, 3, 0.1).unwrap();
        assert_eq!(c, vec![0.1, 0.1, 0.1]);
        let c = init_center(&[-0.01, 0.02], 1, 2, 0.1).unwrap();
        assert_eq!(c, vec![-0.1, 0.1]);
    }

    #[test]
    fn center_rejects_non_finite() {
        let err = init_center(&[f64::NAN, 0.0], 1, 2, 0.1).unwrap_err();
        assert_eq!(err, ObjectiveError::NonFiniteFeatures);
    }

    #[test]
    fn squared_distance_examples() {
        let mut g = Graph::new();
        let f = g.constant(&[2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let d2 = squared_distances(&mut g, f, &[1.0, -2.0]).unwrap();
        assert_eq!(g.values(d2)[0], 0.0);
        let f = g.constant(&[1, 2], vec![3.0, 4.0]).unwrap();
        let d2 = squared_distances(&mut g, f, &[0.0, 0.0]).unwrap();
        assert_eq!(g.values(d2), &[25.0]);
    }

    #[test]
    fn squared_distance_translation_invariance() {
        let rows = [0.3, 1.7, -0.4, 0.9];
        let c = [0.2, -0.5];
        let t = [10.0, -3.0];
        let mut g = Graph::new();
        let f = g.constant(&[2, 2], rows.to_vec()).unwrap();
        let base = squared_distances(&mut g, f, &c).unwrap();
        let shifted_rows: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| v + t[i % 2])
            .collect();
        let shifted_c = [c[0] + t[0], c[1] + t[1]];
        let f2 = g.constant(&[2, 2], shifted_rows).unwrap();
        let moved = squared_distances(&mut g, f2, &shifted_c).unwrap();
        for (a, b) in g.values(base).iter().zip(g.values(moved)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn radius_quantile_examples() {
        assert_eq!(update_radius(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 3.0);
        assert_eq!(update_radius(&[7.0; 5], 0.4).unwrap(), 7.0);
        assert_eq!(update_radius(&[5.0, 1.0, 3.0], 1.0).unwrap(), 1.0);
        assert!(matches!(
            update_radius(&[], 0.5),
            Err(ObjectiveError::EmptyBatch)
        ));
    }

    #[test]
    fn radius_matches_sort_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let nus = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
        for trial in 0..1000 {
            let n = rng.gen_range(1..=500);
            let dists: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let nu = nus[trial % nus.len()];
            let got = update_radius(&dists, nu).unwrap();
            let mut sorted = dists.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let idx = (((1.0 - nu) * n as f64).ceil() as usize).max(1);
            assert_eq!(got, sorted[idx - 1], "trial {trial} n {n} nu {nu}");
        }
    }

    #[test]
    fn one_class_loss_zero_at_collapse_point() {
        let mut g = Graph::new();
        let st = state(SvddMode::OneClass, vec![0.4, -0.7]);
        let f = g.constant(&[1, 2], vec![0.4, -0.7]).unwrap();
        let loss = svdd_loss(&mut g, f, &st, None, None).unwrap();
        assert_eq!(g.scalar_value(loss), 0.0);
    }

    #[test]
    fn soft_boundary_loss_hand_evaluation() {
        // d = [1,2,3,4], nu = 0.25 -> R = 3; loss = 9 + max(0, 16-9) = 16
        let mut st = state(SvddMode::SoftBoundary, vec![0.0]);
        st.radius = update_radius(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap();
        assert_eq!(st.radius, 3.0);
        let mut g = Graph::new();
        let f = g.constant(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let loss = svdd_loss(&mut g, f, &st, None, None).unwrap();
        assert_eq!(g.scalar_value(loss), 16.0);
    }

    #[test]
    fn semi_supervised_loss_hand_evaluation() {
        // one unlabeled d2=1, one labeled anomaly d2=4, eta=1, eps->0:
        // 0.5 * 1 + 0.5 * 0.25 = 0.625
        let mut st = state(SvddMode::SemiSupervised, vec![0.0]);
        st.eps_inv = 0.0_f64.max(1e-15);
        let mut g = Graph::new();
        let f = g.constant(&[2, 1], vec![1.0, 2.0]).unwrap();
        let labels = [RowLabel::Unlabeled, RowLabel::Anomaly];
        let loss = svdd_loss(&mut g, f, &st, Some(&labels), None).unwrap();
        assert!((g.scalar_value(loss) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn unsupervised_modes_reject_labels() {
        let st = state(SvddMode::OneClass, vec![0.0]);
        let mut g = Graph::new();
        let f = g.constant(&[1, 1], vec![2.0]).unwrap();
        let err = svdd_loss(&mut g, f, &st, Some(&[RowLabel::Anomaly]), None).unwrap_err();
        assert_eq!(err, ObjectiveError::LabelsInUnsupervisedMode);
        // all-unlabeled annotations are fine
        let ok = svdd_loss(&mut g, f, &st, Some(&[RowLabel::Unlabeled]), None);
        assert!(ok.is_ok());
    }

    #[test]
    fn anomaly_score_examples() {
        let st = state(SvddMode::OneClass, vec![1.0, 2.0]);
        let scores = anomaly_score(&[1.0, 2.0], 1, &st);
        assert_eq!(scores, vec![0.0]);

        let mut st = state(SvddMode::SoftBoundary, vec![0.0]);
        st.radius = 3.0;
        let scores = anomaly_score(&[4.0], 1, &st);
        assert_eq!(scores, vec![16.0 - 9.0]);
    }

    #[test]
    fn soft_boundary_score_shift_preserves_ranking() {
        let mut st = state(SvddMode::SoftBoundary, vec![0.0]);
        st.radius = 2.0;
        let feats = [0.5, 3.0, 1.5, 2.5];
        let shifted = anomaly_score(&feats, 4, &st);
        let raw = squared_distances_values(&feats, 4, &st.center);
        let mut order_a: Vec<usize> = (0..4).collect();
        let mut order_b = order_a.clone();
        order_a.sort_by(|&i, &j| shifted[i].total_cmp(&shifted[j]));
        order_b.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
        assert_eq!(order_a, order_b);
    }

    #[test]
    fn semi_loss_monotone_in_labeled_distances() {
        let st = state(SvddMode::SemiSupervised, vec![0.0]);
        let eval = |anomaly_feat: f64, label: RowLabel| {
            let mut g = Graph::new();
            let f = g.constant(&[2, 1], vec![1.0, anomaly_feat]).unwrap();
            let labels = [RowLabel::Unlabeled, label];
            let loss = svdd_loss(&mut g, f, &st, Some(&labels), None).unwrap();
            g.scalar_value(loss)
        };
        // pushing a labeled anomaly further out lowers the loss
        assert!(eval(2.0, RowLabel::Anomaly) > eval(3.0, RowLabel::Anomaly));
        // pushing a labeled normal further out raises it
        assert!(eval(2.0, RowLabel::Normal) < eval(3.0, RowLabel::Normal));
    }

    #[test]
    fn one_class_loss_zero_iff_all_rows_at_center() {
        let st = state(SvddMode::OneClass, vec![0.3, -0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(1..6);
            let collapse = rng.gen_bool(0.5);
            let mut rows = Vec::new();
            let mut any_off = false;
            for _ in 0..n {
                if collapse {
                    rows.extend_from_slice(&st.center);
                } else {
                    let dx: f64 = rng.gen_range(-1.0..1.0);
                    let dy: f64 = rng.gen_range(-1.0..1.0);
                    if dx != 0.0 || dy != 0.0 {
                        any_off = true;
                    }
                    rows.push(st.center[0] + dx);
                    rows.push(st.center[1] + dy);
                }
            }
            let mut g = Graph::new();
            let f = g.constant(&[n, 2], rows).unwrap();
            let loss = svdd_loss(&mut g, f, &st, None, None).unwrap();
            let v = g.scalar_value(loss);
            if collapse || !any_off {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn soft_boundary_loss_bounded_below_by_r_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.gen_range(1..20);
            let feats: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut st = state(SvddMode::SoftBoundary, vec![0.1, -0.3]);
            let d2 = squared_distances_values(&feats, n, &st.center);
            let dists: Vec<f64> = d2.iter().map(|v| v.sqrt()).collect();
            st.radius = update_radius(&dists, st.nu).unwrap();
            let mut g = Graph::new();
            let f = g.constant(&[n, 2], feats).unwrap();
            let loss = svdd_loss(&mut g, f, &st, None, None).unwrap();
            assert!(g.scalar_value(loss) >= st.radius * st.radius);
        }
    }

    #[test]
    fn loss_gradients_check_against_finite_differences() {
        let feats = vec![0.6, -0.4, 1.3, 0.8, -0.9, 0.2];
        let labels = [RowLabel::Unlabeled, RowLabel::Normal, RowLabel::Anomaly];
        let cases: Vec<(&str, SvddState, Option<Vec<RowLabel>>)> = vec![
            ("one_class", state(SvddMode::OneClass, vec![0.2, -0.1]), None),
            (
                "soft_boundary",
                {
                    let mut st = state(SvddMode::SoftBoundary, vec![0.2, -0.1]);
                    st.radius = 0.9; // keeps every d2 away from the hinge kink
                    st
                },
                None,
            ),
            (
                "semi_supervised",
                state(SvddMode::SemiSupervised, vec![0.2, -0.1]),
                Some(labels.to_vec()),
            ),
        ];
        for (name, st, labels) in cases {
            let err = grad_check(
                &move |g: &mut Graph, f: Tensor| {
                    svdd_loss(g, f, &st, labels.as_deref(), None).map_err(|e| match e {
                        ObjectiveError::Tensor(t) => t,
                        other => panic!("{other}"),
                    })
                },
                &[3, 2],
                &feats,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{name}: relative error {err}");
        }
    }

    #[test]
    fn weight_decay_sums_squared_frobenius_norms() {
        let mut g = Graph::new();
        let w1 = g.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w2 = g.constant(&[1, 2], vec![0.5, -0.5]).unwrap();
        let wd = weight_decay_term(&mut g, &[w1, w2], 0.1);
        // 0.05 * (30 + 0.5)
        assert!((g.scalar_value(wd) - 0.05 * 30.5).abs() < 1e-12);
    }
}
