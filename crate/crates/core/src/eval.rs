//! Classification metrics and the model x feature-set x target experiment
//! matrix.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, PreparedDataset, Target};
use crate::models::{self, design_matrix, ModelArtifact, ModelKind, TrainConfig, TrainingSet};

fn check_pair(labels: &[bool], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!("{} labels but {} scores", labels.len(), scores.len())));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no scored rows".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("labels contain a single class".into()));
    }
    Ok((pos, neg))
}

/// Mean of sensitivity and specificity, predicting positive at `score >= threshold`.
pub fn balanced_accuracy(labels: &[bool], scores: &[f64], threshold: f64) -> Result<f64> {
    check_pair(labels, scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut tp = 0usize;
    let mut tn = 0usize;
    for (&l, &s) in labels.iter().zip(scores) {
        let predicted = s >= threshold;
        if l && predicted {
            tp += 1;
        } else if !l && !predicted {
            tn += 1;
        }
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

/// Number of rows in the top `k` percent: `ceil(n * k / 100)`.
pub fn top_k_count(n: usize, k_percent: f64) -> Result<usize> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::Config(format!("k_percent {k_percent} outside (0, 100]")));
    }
    Ok(((n as f64 * k_percent / 100.0).ceil() as usize).clamp(1, n.max(1)))
}

/// Share of positives among the top `ceil(n * k / 100)` scores; equal scores
/// keep their input order.
pub fn precision_at_k(labels: &[bool], scores: &[f64], k_percent: f64) -> Result<f64> {
    let m = top_k_count(labels.len(), k_percent)?;
    check_pair(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let hits = order[..m].iter().filter(|&&i| labels[i]).count();
    Ok(hits as f64 / m as f64)
}

/// Area under the ROC curve from mid-ranks, so ties earn half credit.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check_pair(labels, scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based: positions i..=j share (i + j) / 2 + 1
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub target: Target,
    pub balanced_accuracy: f64,
    pub precision_at_k: f64,
    pub auc: f64,
    pub n_test: usize,
    pub positive_prevalence: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub target: Target,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_percent: f64,
    pub threshold: f64,
    pub rows: Vec<EvalRow>,
    /// Cells that did not complete; a non-empty list marks the report partial.
    pub failures: Vec<CellFailure>,
    pub provenance: serde_json::Value,
}

impl EvalReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn rows_for(&self, target: Target) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(move |r| r.target == target)
    }

    pub fn find(&self, model: ModelKind, feature_set: FeatureSet, target: Target) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.feature_set == feature_set && r.target == target)
    }
}

/// Balanced accuracy descending, ties broken by AUC then by cell identity.
pub fn sort_rows(rows: &mut [EvalRow]) {
    rows.sort_by(|a, b| {
        b.balanced_accuracy
            .total_cmp(&a.balanced_accuracy)
            .then_with(|| b.auc.total_cmp(&a.auc))
            .then_with(|| a.target.cmp(&b.target))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.feature_set.cmp(&b.feature_set))
    });
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixConfig {
    pub seed: u64,
    pub k_percent: f64,
    pub threshold: f64,
    pub logreg: TrainConfig,
    pub ffnn: TrainConfig,
    pub lstm: TrainConfig,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k_percent: 5.0,
            threshold: 0.5,
            logreg: TrainConfig::default(),
            ffnn: TrainConfig::default(),
            lstm: TrainConfig::default(),
        }
    }
}

impl MatrixConfig {
    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        match kind {
            ModelKind::Random | ModelKind::LogisticRegression => self.logreg.clone(),
            ModelKind::FeedforwardNN => self.ffnn.clone(),
            ModelKind::LSTM => self.lstm.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        top_k_count(1, self.k_percent)?;
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        for c in [&self.logreg, &self.ffnn, &self.lstm] {
            c.validate()?;
        }
        Ok(())
    }
}

/// Seed for one matrix cell: the first eight bytes (little-endian) of
/// `sha256("{seed}|{model}|{feature_set}|{target}")`.
pub fn cell_seed(seed: u64, kind: ModelKind, feature_set: FeatureSet, target: Target) -> u64 {
    let digest = Sha256::digest(format!("{seed}|{}|{feature_set}|{target}", kind.id()).as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// One completed cell and its trained model.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub row: EvalRow,
    pub artifact: ModelArtifact,
    pub test_scores: Vec<f64>,
}

#[derive(Debug)]
pub struct MatrixOutcome {
    pub report: EvalReport,
    pub cells: Vec<CellResult>,
}

struct Matrices {
    train: Array2<f64>,
    test: Array2<f64>,
}

/// Trains and evaluates every (model, dataset, target) combination. Cells
/// may run in parallel; rows and cells come back in deterministic order.
pub fn run_matrix(
    datasets: &[PreparedDataset],
    kinds: &[ModelKind],
    targets: &[Target],
    config: &MatrixConfig,
) -> Result<MatrixOutcome> {
    config.validate()?;
    let matrices: Vec<Matrices> = datasets
        .iter()
        .map(|d| {
            Ok(Matrices {
                train: design_matrix(&d.train)?,
                test: design_matrix(&d.test)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (di, _) in datasets.iter().enumerate() {
        for &target in targets {
            for &kind in kinds {
                jobs.push((di, target, kind));
            }
        }
    }

    let results: Vec<std::result::Result<CellResult, CellFailure>> = jobs
        .par_iter()
        .map(|&(di, target, kind)| {
            let d = &datasets[di];
            let fs = d.spec.feature_set;
            run_cell(d, &matrices[di], kind, target, config).map_err(|e| CellFailure {
                model: kind,
                feature_set: fs,
                target,
                error: e.to_string(),
            })
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }
    let mut rows: Vec<EvalRow> = cells.iter().map(|c| c.row.clone()).collect();
    sort_rows(&mut rows);
    Ok(MatrixOutcome {
        report: EvalReport {
            k_percent: config.k_percent,
            threshold: config.threshold,
            rows,
            failures,
            provenance: serde_json::Value::Null,
        },
        cells,
    })
}

fn run_cell(
    d: &PreparedDataset,
    m: &Matrices,
    kind: ModelKind,
    target: Target,
    config: &MatrixConfig,
) -> Result<CellResult> {
    let fs = d.spec.feature_set;
    let seed = cell_seed(config.seed, kind, fs, target);
    let train_config = TrainConfig {
        seed,
        ..config.train_config(kind)
    };
    let y_train = target.labels(&d.train);
    let y_test = target.labels(&d.test);
    let set = TrainingSet {
        x: m.train.view(),
        y: &y_train,
        feature_set: fs,
        n_weeks: d.spec.n_features_weeks,
        target,
        stats: Some(d.stats.clone()),
    };
    let artifact = models::fit(kind, &set, &train_config)?;
    let scores = models::score(&artifact, m.test.view())?;
    let row = EvalRow {
        model: kind,
        feature_set: fs,
        target,
        balanced_accuracy: balanced_accuracy(&y_test, &scores, config.threshold)?,
        precision_at_k: precision_at_k(&y_test, &scores, config.k_percent)?,
        auc: auc(&y_test, &scores)?,
        n_test: y_test.len(),
        positive_prevalence: y_test.iter().filter(|&&y| y).count() as f64 / y_test.len() as f64,
        seed,
    };
    Ok(CellResult {
        row,
        artifact,
        test_scores: scores,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    model: &'a str,
    feature_set: String,
    target: &'a str,
    balanced_accuracy: f64,
    precision_at_k: f64,
    auc: f64,
    n_test: usize,
    positive_prevalence: f64,
    seed: u64,
}

pub fn write_report_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(CsvRow {
            model: r.model.display_name(),
            feature_set: r.feature_set.to_string(),
            target: r.target.name(),
            balanced_accuracy: r.balanced_accuracy,
            precision_at_k: r.precision_at_k,
            auc: r.auc,
            n_test: r.n_test,
            positive_prevalence: r.positive_prevalence,
            seed: r.seed,
        })?;
    }
    if report.rows.is_empty() {
        w.write_record([
            "model",
            "feature_set",
            "target",
            "balanced_accuracy",
            "precision_at_k",
            "auc",
            "n_test",
            "positive_prevalence",
            "seed",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &EvalReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// ROC curve points `(false positive rate, true positive rate)` from the
/// highest threshold down, one point per distinct score.
pub fn roc_points(labels: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_pair(labels, scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (idx, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(idx + 1).map_or(true, |&n| scores[n] != scores[i]);
        if last_of_tie {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_accuracy_hand_counted() {
        let labels = [true, true, false, false];
        let ba = balanced_accuracy(&labels, &[1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(ba, 0.75);
        assert_eq!(balanced_accuracy(&labels, &[0.9, 0.8, 0.1, 0.2], 0.5).unwrap(), 1.0);
        assert!(matches!(
            balanced_accuracy(&[true, true], &[0.1, 0.2], 0.5),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(balanced_accuracy(&[true, false], &[0.5, 0.49], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn auc_small_cases() {
        assert_eq!(auc(&[true, false], &[0.3, 0.3]).unwrap(), 0.5);
        assert_eq!(auc(&[true, false, true, false], &[0.9, 0.1, 0.8, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[true, false, true, false], &[0.1, 0.9, 0.2, 0.8]).unwrap(), 0.0);
        assert!(auc(&[false, false], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn precision_at_k_cases() {
        let labels = [true, false, false, false];
        assert_eq!(precision_at_k(&labels, &[0.9, 0.1, 0.2, 0.3], 25.0).unwrap(), 1.0);
        // ceil(4 * 30 / 100) = 2
        assert_eq!(precision_at_k(&labels, &[0.9, 0.1, 0.2, 0.3], 30.0).unwrap(), 0.5);
        // ties keep input order
        let tied = [false, true, true, false];
        assert_eq!(precision_at_k(&tied, &[0.5; 4], 25.0).unwrap(), 0.0);
        assert_eq!(precision_at_k(&tied, &[0.5; 4], 50.0).unwrap(), 0.5);
        assert!(precision_at_k(&labels, &[0.0; 4], 0.0).is_err());
        assert!(precision_at_k(&labels, &[0.0; 4], 100.5).is_err());
    }

    #[test]
    fn roc_ends_at_one_one() {
        let pts = roc_points(&[true, false, true], &[0.9, 0.5, 0.5]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn cell_seeds_differ_by_cell() {
        let a = cell_seed(1, ModelKind::LSTM, FeatureSet::ALL, Target::LowPickup);
        assert_eq!(a, cell_seed(1, ModelKind::LSTM, FeatureSet::ALL, Target::LowPickup));
        assert_ne!(a, cell_seed(1, ModelKind::LSTM, FeatureSet::ALL, Target::LowEngagement));
        assert_ne!(a, cell_seed(2, ModelKind::LSTM, FeatureSet::ALL, Target::LowPickup));
    }

    #[test]
    fn rows_sort_by_balanced_accuracy() {
        let row = |model, ba| EvalRow {
            model,
            feature_set: FeatureSet::ALL,
            target: Target::LowPickup,
            balanced_accuracy: ba,
            precision_at_k: 0.0,
            auc: 0.5,
            n_test: 1,
            positive_prevalence: 0.5,
            seed: 0,
        };
        let mut rows = vec![row(ModelKind::Random, 0.5), row(ModelKind::LSTM, 0.7), row(ModelKind::FeedforwardNN, 0.6)];
        sort_rows(&mut rows);
        let order: Vec<_> = rows.iter().map(|r| r.model).collect();
        assert_eq!(order, vec![ModelKind::LSTM, ModelKind::FeedforwardNN, ModelKind::Random]);
    }
}
