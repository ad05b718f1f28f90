//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use chrono::{Duration, NaiveDate, NaiveTime};
use listenership::features::{FeatureSet, WindowSpec};
use listenership::ingest::{CallAttemptRecord, SummaryConfig, TechnicalStatus, Trajectory, WeeklySummary};
use listenership::models::{LossOptions, Network};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over all
/// parameters, with central differences at step `1e-5`.
pub fn max_relative_error(net: &Network, x: ArrayView2<'_, f64>, y: &[f64], opts: &LossOptions) -> f64 {
    let (_, analytic) = net.loss_and_grad(x, y, opts).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..net.params.len() {
        let p = net.params[i];
        probe.params[i] = p + h;
        let up = probe.loss(x, y, opts).unwrap();
        probe.params[i] = p - h;
        let down = probe.loss(x, y, opts).unwrap();
        probe.params[i] = p;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

pub fn random_instance(seed: u64, rows: usize, cols: usize) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-2.0..2.0));
    let y = (0..rows).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    (x, y)
}

/// Share of (positive, negative) pairs ordered correctly, ties counting half.
pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

pub fn confusion_balanced_accuracy(labels: &[bool], scores: &[f64], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&l, &s) in labels.iter().zip(scores) {
        match (l, s >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let sensitivity = tp as f64 / (tp + fn_) as f64;
    let specificity = tn as f64 / (tn + fp) as f64;
    (sensitivity + specificity) / 2.0
}

/// Insertion sort by score descending keeps tied rows in input order.
pub fn sort_and_count_precision(labels: &[bool], scores: &[f64], k_percent: f64) -> f64 {
    let mut order: Vec<usize> = Vec::new();
    for i in 0..scores.len() {
        let pos = order.iter().position(|&j| scores[j] < scores[i]).unwrap_or(order.len());
        order.insert(pos, i);
    }
    let mut m = 0;
    while (m as f64) * 100.0 < scores.len() as f64 * k_percent {
        m += 1;
    }
    order[..m].iter().filter(|&&i| labels[i]).count() as f64 / m as f64
}

/// A trajectory whose weeks are individually recognisable: week `w` lasts
/// `w + 1` seconds over `w % 9 + 1` attempts, with seeded pickup flags.
pub fn marked_trajectory(id: &str, n_weeks: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weeks = (0..n_weeks)
        .map(|w| {
            let mut s = WeeklySummary::empty(id, w as u32 + 1);
            s.n_attempts = (w % 9) as u32 + 1;
            s.total_duration_seconds = w as f64 + 1.0;
            s.picked = rng.gen_bool(0.5);
            s.engaged = s.picked && rng.gen_bool(0.5);
            s.status_counts[TechnicalStatus::PickedUp.index()] = u32::from(s.picked);
            s.status_counts[TechnicalStatus::Busy.index()] = s.n_attempts - u32::from(s.picked);
            s
        })
        .collect();
    Trajectory {
        beneficiary_id: id.to_string(),
        weeks,
    }
}

pub struct OracleWindow {
    pub start_week: u32,
    pub features: Vec<f64>,
    pub low_pickup: bool,
    pub low_engagement: bool,
}

/// Every start position `s` with `s + L <= T`, visited one week at a time and
/// kept when `s` is a multiple of the stride.
pub fn enumerate_windows(t: &Trajectory, spec: &WindowSpec, n_slots: usize) -> Vec<OracleWindow> {
    let nf = spec.n_features_weeks;
    let label_from = nf + spec.n_offset_weeks;
    let total = label_from + 6;
    let mut out = Vec::new();
    for s in 0..t.weeks.len() {
        if s + total > t.weeks.len() || s % spec.stride_weeks != 0 {
            continue;
        }
        let mut features = Vec::new();
        for w in &t.weeks[s..s + nf] {
            spec.feature_set.week_features(w, n_slots, &mut features);
        }
        let label = &t.weeks[s + label_from..s + total];
        out.push(OracleWindow {
            start_week: t.weeks[s].message_index,
            features,
            low_pickup: label.iter().filter(|w| w.picked).count() < 3,
            low_engagement: label.iter().filter(|w| w.engaged).count() < 3,
        });
    }
    out
}

pub fn window_spec(nf: usize, offset: usize, stride: usize, feature_set: FeatureSet) -> WindowSpec {
    WindowSpec {
        n_features_weeks: nf,
        n_offset_weeks: offset,
        stride_weeks: stride,
        feature_set,
        ..WindowSpec::default()
    }
}

pub fn attempt(id: &str, week: u32, n: u32, status: TechnicalStatus, duration: f64) -> CallAttemptRecord {
    let date = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap() + Duration::weeks(i64::from(week));
    CallAttemptRecord {
        beneficiary_id: id.to_string(),
        message_index: week,
        attempt_number: n,
        attempt_date: date,
        attempt_time: NaiveTime::from_hms_opt(9, 0, 0).unwrap() + Duration::minutes(i64::from(n)),
        status,
        duration_seconds: duration,
        gestation_week: None,
    }
}

pub fn summary_config() -> SummaryConfig {
    SummaryConfig::default()
}
