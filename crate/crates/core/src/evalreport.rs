//! ROC-AUC (Mann-Whitney with half-credit ties), multi-run aggregation, and
//! CSV report emission.

use std::fmt;
use std::path::{Path, PathBuf};

pub type EvalResult<T> = Result<T, EvalError>;

#[derive(Debug)]
pub enum EvalError {
    Empty,
    LengthMismatch { scores: usize, truth: usize },
    /// AUC needs at least one normal and one anomalous score.
    SingleClass,
    NonFinite { index: usize },
    Io { path: String, source: std::io::Error },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty input"),
            Self::LengthMismatch { scores, truth } => {
                write!(f, "{scores} scores but {truth} truth values")
            }
            Self::SingleClass => write!(f, "both classes must be present for AUC"),
            Self::NonFinite { index } => write!(f, "non-finite score at index {index}"),
            Self::Io { path, source } => write!(f, "io error on {path}: {source}"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Anomaly scores with ground truth (true = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub truth: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, truth: Vec<bool>) -> EvalResult<Self> {
        if scores.len() != truth.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                truth: truth.len(),
            });
        }
        if scores.is_empty() {
            return Err(EvalError::Empty);
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite { index: i });
        }
        Ok(Self { scores, truth })
    }
}

/// Print a float with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Probability that a random anomalous score exceeds a random normal score,
/// ties counted half. Computed in O(n log n) from averaged rank sums.
pub fn roc_auc(set: &ScoredSet) -> EvalResult<f64> {
    let n = set.scores.len();
    let anomalous = set.truth.iter().filter(|t| **t).count();
    let normal = n - anomalous;
    if anomalous == 0 || normal == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));

    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j]
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if set.truth[idx] {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (anomalous * (anomalous + 1)) as f64 / 2.0;
    Ok(u / (anomalous * normal) as f64)
}

/// ROC polyline from (0,0) to (1,1), one vertex per distinct score.
pub fn roc_points(set: &ScoredSet) -> EvalResult<Vec<(f64, f64)>> {
    let n = set.scores.len();
    let pos = set.truth.iter().filter(|t| **t).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));

    let mut points = Vec::with_capacity(n + 2);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev: Option<f64> = None;
    for &idx in &order {
        let s = set.scores[idx];
        if prev != Some(s) {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
            prev = Some(s);
        }
        if set.truth[idx] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    points.push((1.0, 1.0));
    Ok(points)
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

/// Mean and sample (n-1) standard deviation over per-seed AUCs; std is None
/// for a single run.
pub fn aggregate_runs(aucs: &[f64]) -> EvalResult<(f64, Option<f64>)> {
    if aucs.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    if aucs.len() < 2 {
        return Ok((mean, None));
    }
    let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, Some(var.sqrt())))
}

/// One completed training run feeding a report.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Grouping key; runs sharing it aggregate into one summary row.
    pub config: String,
    /// Distinguishes runs within a config, e.g. "seed1".
    pub run: String,
    pub auc: f64,
    /// Test-split scores behind `auc`; used for the ROC point dump.
    pub scored: ScoredSet,
    /// Training trajectory CSV, copied through for external plotting.
    pub metrics_csv: String,
}

/// Write summary, per-run ROC point, and trajectory CSVs. Returns the paths
/// written, summary first.
pub fn emit_report(runs: &[RunRecord], out_dir: &Path) -> EvalResult<Vec<PathBuf>> {
    let io_err = |path: &Path, source: std::io::Error| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut written = Vec::new();

    // summary: one row per config, in first-seen order
    let mut configs: Vec<&str> = Vec::new();
    for r in runs {
        if !configs.contains(&r.config.as_str()) {
            configs.push(&r.config);
        }
    }
    let mut summary = String::from("config,runs,auc_mean,auc_std\n");
    for cfg in &configs {
        let aucs: Vec<f64> = runs
            .iter()
            .filter(|r| r.config == *cfg)
            .map(|r| r.auc)
            .collect();
        let (mean, std) = aggregate_runs(&aucs)?;
        let std_str = std.map(fmt_f64).unwrap_or_default();
        summary.push_str(&format!("{cfg},{},{},{std_str}\n", aucs.len(), fmt_f64(mean)));
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary).map_err(|e| io_err(&summary_path, e))?;
    written.push(summary_path);

    for r in runs {
        let roc = roc_points(&r.scored)?;
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in &roc {
            csv.push_str(&format!("{},{}\n", fmt_f64(*fpr), fmt_f64(*tpr)));
        }
        let roc_path = out_dir.join(format!("roc_{}_{}.csv", r.config, r.run));
        std::fs::write(&roc_path, csv).map_err(|e| io_err(&roc_path, e))?;
        written.push(roc_path);

        let traj_path = out_dir.join(format!("trajectory_{}_{}.csv", r.config, r.run));
        std::fs::write(&traj_path, &r.metrics_csv).map_err(|e| io_err(&traj_path, e))?;
        written.push(traj_path);
    }
    Ok(written)
}
