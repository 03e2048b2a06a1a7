//! Train/val/test index construction for the two experimental setups.

use rand::seq::SliceRandom;

use super::{stream_rng, CorpusError, CorpusResult, ImageCorpus, SetupKind, SplitSpec};
use crate::objective::RowLabel;

const NORMALS_STREAM: u64 = 1 << 41;
const POOL_STREAM: u64 = (1 << 41) + 1;

/// Disjoint index sets over a corpus, with per-row training labels and
/// val/test ground truth (true = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub train_labels: Vec<RowLabel>,
    pub val: Vec<usize>,
    pub val_truth: Vec<bool>,
    pub test: Vec<usize>,
    pub test_truth: Vec<bool>,
}

impl Splits {
    pub fn train_anomaly_count(&self) -> usize {
        self.train_labels
            .iter()
            .filter(|l| **l == RowLabel::Anomaly)
            .count()
    }
}

/// Labeled-anomaly count that makes the train set's labeled fraction hit
/// `fraction` up to rounding.
fn labeled_count(n_unlabeled: usize, fraction: f64) -> usize {
    (n_unlabeled as f64 * fraction / (1.0 - fraction)).round() as usize
}

fn three_way_counts(total: usize, spec: &SplitSpec) -> CorpusResult<(usize, usize, usize)> {
    let n_train = (total as f64 * spec.train_fraction).floor() as usize;
    let n_val = (total as f64 * spec.val_fraction).floor() as usize;
    let n_test = total.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(CorpusError::Infeasible(format!(
            "{total} normals split into train {n_train} / val {n_val} / test {n_test}"
        )));
    }
    Ok((n_train, n_val, n_test))
}

/// Pure function of (corpus, spec, seed); all index sets are disjoint.
pub fn build_splits(
    corpus: &ImageCorpus,
    spec: &SplitSpec,
    seed: u64,
) -> CorpusResult<Splits> {
    spec.validate()?;
    match spec.setup {
        SetupKind::Alteration => build_alteration(corpus, spec, seed),
        SetupKind::OneVsAll => build_one_vs_all(corpus, spec, seed),
    }
}

fn build_alteration(
    corpus: &ImageCorpus,
    spec: &SplitSpec,
    seed: u64,
) -> CorpusResult<Splits> {
    let mut counterpart = vec![None; corpus.count()];
    let mut naturals = Vec::new();
    for idx in 0..corpus.count() {
        if corpus.anomaly_flags[idx] {
            let src = parse_src(&corpus.provenance[idx]).ok_or_else(|| {
                CorpusError::Infeasible(format!("anomalous image {idx} lacks src provenance"))
            })?;
            counterpart[src] = Some(idx);
        } else {
            naturals.push(idx);
        }
    }
    for &n in &naturals {
        if counterpart[n].is_none() {
            return Err(CorpusError::Infeasible(format!(
                "natural image {n} has no anomalous counterpart"
            )));
        }
    }

    let mut shuffled = naturals;
    shuffled.shuffle(&mut stream_rng(seed, NORMALS_STREAM));
    let (n_train, n_val, n_test) = three_way_counts(shuffled.len(), spec)?;

    let mut train: Vec<usize> = shuffled[..n_train].to_vec();
    let mut train_labels = vec![RowLabel::Unlabeled; n_train];
    if spec.semi_supervised {
        let m = labeled_count(n_train, spec.labeled_anomaly_fraction);
        if m == 0 || m > n_train {
            return Err(CorpusError::Infeasible(format!(
                "labeled anomaly fraction {} yields {m} labeled rows for {n_train} unlabeled",
                spec.labeled_anomaly_fraction
            )));
        }
        for &nat in shuffled[..m].iter() {
            train.push(counterpart[nat].expect("checked above"));
            train_labels.push(RowLabel::Anomaly);
        }
    }

    let mut val = Vec::with_capacity(2 * n_val);
    let mut val_truth = Vec::with_capacity(2 * n_val);
    for &nat in &shuffled[n_train..n_train + n_val] {
        val.push(nat);
        val_truth.push(false);
        val.push(counterpart[nat].expect("checked above"));
        val_truth.push(true);
    }
    let mut test = Vec::with_capacity(2 * n_test);
    let mut test_truth = Vec::with_capacity(2 * n_test);
    for &nat in &shuffled[n_train + n_val..] {
        test.push(nat);
        test_truth.push(false);
        test.push(counterpart[nat].expect("checked above"));
        test_truth.push(true);
    }

    Ok(Splits {
        train,
        train_labels,
        val,
        val_truth,
        test,
        test_truth,
    })
}

fn build_one_vs_all(
    corpus: &ImageCorpus,
    spec: &SplitSpec,
    seed: u64,
) -> CorpusResult<Splits> {
    let n_classes = corpus
        .class_labels
        .iter()
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    if spec.normal_class >= n_classes {
        return Err(CorpusError::Infeasible(format!(
            "normal class {} out of range for {n_classes} classes",
            spec.normal_class
        )));
    }
    let mut normals = Vec::new();
    let mut pool = Vec::new();
    for idx in 0..corpus.count() {
        if corpus.anomaly_flags[idx] {
            continue; // one-vs-all draws anomalies from the other classes
        }
        if corpus.class_labels[idx] as usize == spec.normal_class {
            normals.push(idx);
        } else {
            pool.push(idx);
        }
    }
    normals.shuffle(&mut stream_rng(seed, NORMALS_STREAM));
    pool.shuffle(&mut stream_rng(seed, POOL_STREAM));
    let (n_train, n_val, n_test) = three_way_counts(normals.len(), spec)?;

    let mut train: Vec<usize> = normals[..n_train].to_vec();
    let mut train_labels = vec![RowLabel::Unlabeled; n_train];
    if spec.semi_supervised {
        // labeled anomalies come from a single designated class
        let anomaly_class = ((spec.normal_class + 1) % n_classes) as i32;
        let m = labeled_count(n_train, spec.labeled_anomaly_fraction);
        let mut taken = 0;
        let mut remaining = Vec::with_capacity(pool.len());
        for idx in pool {
            if taken < m && corpus.class_labels[idx] == anomaly_class {
                train.push(idx);
                train_labels.push(RowLabel::Anomaly);
                taken += 1;
            } else {
                remaining.push(idx);
            }
        }
        if taken < m.max(1) {
            return Err(CorpusError::Infeasible(format!(
                "anomaly class {anomaly_class} has only {taken} spare samples, need {m}"
            )));
        }
        pool = remaining;
    }

    if pool.len() < n_val + n_test {
        return Err(CorpusError::Infeasible(format!(
            "anomaly pool {} too small for val {n_val} + test {n_test}",
            pool.len()
        )));
    }
    let mut val: Vec<usize> = normals[n_train..n_train + n_val].to_vec();
    let mut val_truth = vec![false; n_val];
    val.extend_from_slice(&pool[..n_val]);
    val_truth.extend(std::iter::repeat(true).take(n_val));

    let mut test: Vec<usize> = normals[n_train + n_val..].to_vec();
    let mut test_truth = vec![false; n_test];
    test.extend_from_slice(&pool[n_val..n_val + n_test]);
    test_truth.extend(std::iter::repeat(true).take(n_test));

    Ok(Splits {
        train,
        train_labels,
        val,
        val_truth,
        test,
        test_truth,
    })
}

fn parse_src(provenance: &str) -> Option<usize> {
    provenance
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("src="))
        .and_then(|v| v.parse().ok())
}
