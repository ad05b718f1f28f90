//! Random, logistic-regression, feedforward and LSTM classifiers with one
//! fit/score interface.

mod artifact;
mod network;
mod optim;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureWindow, StandardizationStats, Target};

pub use artifact::{ModelArtifact, ARTIFACT_FORMAT};
pub use network::{clamp_logit, sigmoid, Architecture, LossOptions, Network, ParamShape, LOGIT_CLAMP};
pub use optim::{Adam, AdamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "logreg")]
    LogisticRegression,
    #[serde(rename = "ffnn")]
    FeedforwardNN,
    #[serde(rename = "lstm")]
    LSTM,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Random,
        ModelKind::LogisticRegression,
        ModelKind::FeedforwardNN,
        ModelKind::LSTM,
    ];

    /// Short identifier used in configs and file names.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Random => "random",
            ModelKind::LogisticRegression => "logreg",
            ModelKind::FeedforwardNN => "ffnn",
            ModelKind::LSTM => "lstm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Random => "Random",
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::FeedforwardNN => "Feedforward NN",
            ModelKind::LSTM => "LSTM",
        }
    }

    pub fn is_trainable(self) -> bool {
        self != ModelKind::Random
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s || k.display_name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    /// Share of training rows held out to monitor loss.
    pub validation_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: AdamConfig,
    pub l2_penalty: f64,
    pub early_stop: Option<EarlyStop>,
    pub positive_class_weight: Option<f64>,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub lstm_units: usize,
    /// Train on a seeded subsample of at most this many rows.
    pub max_train_rows: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            optimizer: AdamConfig::default(),
            l2_penalty: 0.0,
            early_stop: None,
            positive_class_weight: None,
            hidden_layers: 3,
            hidden_units: 128,
            lstm_units: 128,
            max_train_rows: None,
        }
    }
}

impl TrainConfig {
    /// Zero epochs is accepted and leaves the initialized network untouched.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.l2_penalty < 0.0 || !self.l2_penalty.is_finite() {
            return Err(Error::Config("l2_penalty must be non-negative".into()));
        }
        if let Some(w) = self.positive_class_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config("positive_class_weight must be positive".into()));
            }
        }
        if let Some(es) = self.early_stop {
            if !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) || es.patience == 0 {
                return Err(Error::Config("early_stop needs patience >= 1 and a fraction in (0, 1)".into()));
            }
        }
        if self.hidden_units == 0 || self.lstm_units == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.max_train_rows == Some(0) {
            return Err(Error::Config("max_train_rows must be at least 1".into()));
        }
        self.optimizer.validate()
    }

    fn loss_options(&self) -> LossOptions {
        LossOptions {
            positive_weight: self.positive_class_weight.unwrap_or(1.0),
            l2_penalty: self.l2_penalty,
        }
    }
}

/// Standardized design matrix plus the metadata an artifact records.
#[derive(Clone, Debug)]
pub struct TrainingSet<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [bool],
    pub feature_set: FeatureSet,
    pub n_weeks: usize,
    pub target: Target,
    pub stats: Option<StandardizationStats>,
}

/// Stacks window features row by row.
pub fn design_matrix(windows: &[FeatureWindow]) -> Result<Array2<f64>> {
    let cols = windows.first().map_or(0, |w| w.features.len());
    let mut flat = Vec::with_capacity(windows.len() * cols);
    for w in windows {
        if w.features.len() != cols {
            return Err(Error::Shape(format!(
                "window of {} features among windows of {cols}",
                w.features.len()
            )));
        }
        flat.extend_from_slice(&w.features);
    }
    Array2::from_shape_vec((windows.len(), cols), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// `n` i.i.d. uniform [0, 1) scores.
pub fn score_random(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Empty("random scores for zero rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.gen::<f64>()).collect())
}

fn architecture_for(kind: ModelKind, data: &TrainingSet<'_>, config: &TrainConfig) -> Result<Architecture> {
    let input_dim = data.x.ncols();
    let hidden = vec![config.hidden_units; config.hidden_layers];
    Ok(match kind {
        ModelKind::Random => Architecture::Random { input_dim },
        ModelKind::LogisticRegression => Architecture::Dense {
            input_dim,
            hidden: Vec::new(),
        },
        ModelKind::FeedforwardNN => Architecture::Dense { input_dim, hidden },
        ModelKind::LSTM => {
            let step_dim = data.feature_set.columns_per_week();
            if data.n_weeks == 0 || input_dim != data.n_weeks * step_dim {
                return Err(Error::Shape(format!(
                    "{input_dim} columns cannot form {} steps of {step_dim} features",
                    data.n_weeks
                )));
            }
            Architecture::Lstm {
                steps: data.n_weeks,
                step_dim,
                units: config.lstm_units,
                hidden,
            }
        }
    })
}

fn to_targets(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Trains one model. The same seed and data always give the same artifact.
pub fn fit(kind: ModelKind, data: &TrainingSet<'_>, config: &TrainConfig) -> Result<ModelArtifact> {
    config.validate()?;
    if data.x.nrows() == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if data.x.nrows() != data.y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", data.x.nrows(), data.y.len())));
    }
    if data.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    let architecture = architecture_for(kind, data, config)?;
    let mut artifact = ModelArtifact {
        kind,
        architecture: architecture.clone(),
        params: Vec::new(),
        stats: data.stats.clone(),
        train_config: config.clone(),
        feature_set: data.feature_set,
        n_weeks: data.n_weeks,
        target: data.target,
        seed: config.seed,
        loss_history: Vec::new(),
    };
    if kind.is_trainable() {
        let mut net = Network::init(architecture, config.seed);
        artifact.loss_history = train(&mut net, data.x, &to_targets(data.y), config)?;
        artifact.params = net.params;
    }
    Ok(artifact)
}

pub fn fit_logreg(data: &TrainingSet<'_>, config: &TrainConfig) -> Result<ModelArtifact> {
    fit(ModelKind::LogisticRegression, data, config)
}

pub fn fit_ffnn(data: &TrainingSet<'_>, config: &TrainConfig) -> Result<ModelArtifact> {
    fit(ModelKind::FeedforwardNN, data, config)
}

pub fn fit_lstm(data: &TrainingSet<'_>, config: &TrainConfig) -> Result<ModelArtifact> {
    fit(ModelKind::LSTM, data, config)
}

fn shuffler(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mini-batch Adam. Returns the mean training loss of each epoch; with early
/// stopping the best held-out parameters are restored at the end.
fn train(net: &mut Network, x: ArrayView2<'_, f64>, y: &[f64], config: &TrainConfig) -> Result<Vec<f64>> {
    let opts = config.loss_options();
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    if let Some(cap) = config.max_train_rows.filter(|&c| c < rows.len()) {
        rows.shuffle(&mut shuffler(config.seed, 2));
        rows.truncate(cap);
        rows.sort_unstable();
    }
    let mut holdout = Vec::new();
    if let Some(es) = config.early_stop {
        rows.shuffle(&mut shuffler(config.seed, 3));
        let n_hold = ((rows.len() as f64) * es.validation_fraction).round() as usize;
        if n_hold == 0 || n_hold >= rows.len() {
            return Err(Error::InvalidInput("early stopping needs rows on both sides of the holdout".into()));
        }
        holdout = rows.split_off(rows.len() - n_hold);
        rows.sort_unstable();
        holdout.sort_unstable();
    }
    let hold_x = x.select(Axis(0), &holdout);
    let hold_y: Vec<f64> = holdout.iter().map(|&i| y[i]).collect();

    let mut adam = Adam::new(config.optimizer, config.learning_rate, net.params.len());
    let mut rng = shuffler(config.seed, 1);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0;
    for _ in 0..config.epochs {
        rows.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in rows.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grad) = net.loss_and_grad(xb.view(), &yb, &opts)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss".into()));
            }
            total += loss * batch.len() as f64;
            adam.step(&mut net.params, &grad);
        }
        history.push(total / rows.len() as f64);

        if let Some(es) = config.early_stop {
            let held = net.loss(hold_x.view(), &hold_y, &opts)?;
            match &best {
                Some((b, _)) if held >= *b => {
                    stale += 1;
                    if stale >= es.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((held, net.params.clone()));
                    stale = 0;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        net.params = params;
    }
    Ok(history)
}

const SCORE_CHUNK: usize = 4096;

/// Scores standardized rows. Pure: identical inputs give identical outputs.
pub fn score(artifact: &ModelArtifact, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let want = artifact.architecture.input_dim();
    if x.ncols() != want {
        return Err(Error::Shape(format!("input has {} columns, model expects {want}", x.ncols())));
    }
    if artifact.kind == ModelKind::Random {
        return score_random(x.nrows(), artifact.seed);
    }
    let net = artifact.network()?;
    let chunks: Vec<Vec<f64>> = (0..x.nrows())
        .step_by(SCORE_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + SCORE_CHUNK).min(x.nrows());
            net.predict(x.slice(ndarray::s![start..end, ..]))
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Applies the artifact's standardization before scoring raw features.
pub fn score_raw(artifact: &ModelArtifact, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let mut x = x.to_owned();
    if let Some(stats) = &artifact.stats {
        for mut row in x.rows_mut() {
            let slice = row.as_slice_mut().expect("owned rows are contiguous");
            stats.apply_row(slice)?;
        }
    }
    score(artifact, x.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set<'a>(x: ArrayView2<'a, f64>, y: &'a [bool]) -> TrainingSet<'a> {
        TrainingSet {
            x,
            y,
            feature_set: FeatureSet::DURATION_ATTEMPT,
            n_weeks: 1,
            target: Target::LowPickup,
            stats: None,
        }
    }

    #[test]
    fn random_scores_are_seeded_uniform() {
        let a = score_random(100_000, 4).unwrap();
        assert_eq!(a, score_random(100_000, 4).unwrap());
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
        assert!(score_random(0, 1).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.id().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let zero = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(zero.validate().is_ok());
    }

    #[test]
    fn nan_features_fail_before_training() {
        let x = array![[1.0, f64::NAN], [0.0, 1.0]];
        let y = [true, false];
        let err = fit_logreg(&set(x.view(), &y), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn lstm_rejects_mismatched_sequence_length() {
        let x = Array2::zeros((4, 5));
        let y = [true, false, true, false];
        let err = fit_lstm(&set(x.view(), &y), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn early_stopping_runs_and_restores() {
        let x = Array2::from_shape_fn((200, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let y: Vec<bool> = (0..200).map(|i| x[[i, 0]] > 0.0).collect();
        let config = TrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.05,
            early_stop: Some(EarlyStop {
                patience: 3,
                validation_fraction: 0.25,
            }),
            ..TrainConfig::default()
        };
        let a = fit_logreg(&set(x.view(), &y), &config).unwrap();
        assert!(!a.loss_history.is_empty() && a.loss_history.len() <= 40);
    }
}
