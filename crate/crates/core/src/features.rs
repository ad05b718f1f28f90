//! Rolling-window supervised instances and beneficiary-level splits.
//!
//! A window of `n_features + n_offset + 6` consecutive weeks yields one
//! instance: features from the first `n_features` weeks, labels from the
//! final six, and nothing from the offset weeks in between.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Trajectories, Trajectory, WeeklySummary};
use crate::synthcohort::week_of_year;

pub const LABEL_WINDOW_WEEKS: usize = 6;
/// Fewer than this many picked (or engaged) label weeks is "low".
pub const LOW_LISTENERSHIP_CUT: usize = 3;

/// Which per-week feature groups enter a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet {
    pub duration: bool,
    pub attempt: bool,
    pub status: bool,
    pub date: bool,
}

impl FeatureSet {
    pub const DURATION_ATTEMPT: FeatureSet = FeatureSet {
        duration: true,
        attempt: true,
        status: false,
        date: false,
    };
    pub const DURATION_ATTEMPT_STATUS: FeatureSet = FeatureSet {
        duration: true,
        attempt: true,
        status: true,
        date: false,
    };
    pub const ALL: FeatureSet = FeatureSet {
        duration: true,
        attempt: true,
        status: true,
        date: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.duration || self.attempt || self.status || self.date)
    }

    pub fn columns_per_week(&self) -> usize {
        usize::from(self.duration) + usize::from(self.attempt) + 5 * usize::from(self.status) + 2 * usize::from(self.date)
    }

    fn groups(&self) -> Vec<&'static str> {
        let mut g = Vec::new();
        for (on, name) in [
            (self.duration, "duration"),
            (self.attempt, "attempt"),
            (self.status, "status"),
            (self.date, "date"),
        ] {
            if on {
                g.push(name);
            }
        }
        g
    }

    /// Per-week values in column order: duration, attempts, the five status
    /// counts, week-of-year and pickup slot. Unattempted weeks are all zero.
    pub fn week_features(&self, week: &WeeklySummary, n_slots: usize, out: &mut Vec<f64>) {
        if week.n_attempts == 0 {
            out.extend(std::iter::repeat(0.0).take(self.columns_per_week()));
            return;
        }
        let base = week.model_features();
        if self.duration {
            out.push(base[0]);
        }
        if self.attempt {
            out.push(base[1]);
        }
        if self.status {
            out.extend_from_slice(&base[2..7]);
        }
        if self.date {
            let woy = week.first_attempt_date().map_or(1, week_of_year);
            out.push((f64::from(woy - 1) / 52.0).min(1.0));
            out.push(match week.pickup_slot {
                Some(s) if n_slots > 1 => f64::from(s) / (n_slots - 1) as f64,
                Some(_) => 0.0,
                None => -1.0,
            });
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.groups().join("+"))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut fs = FeatureSet {
            duration: false,
            attempt: false,
            status: false,
            date: false,
        };
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "duration" => fs.duration = true,
                "attempt" => fs.attempt = true,
                "status" => fs.status = true,
                "date" => fs.date = true,
                other => return Err(Error::Config(format!("unknown feature group `{other}`"))),
            }
        }
        if fs.is_empty() {
            return Err(Error::Config("feature set is empty".into()));
        }
        Ok(fs)
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub n_features_weeks: usize,
    pub n_offset_weeks: usize,
    pub label_window_weeks: usize,
    pub stride_weeks: usize,
    pub feature_set: FeatureSet,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            n_features_weeks: 6,
            n_offset_weeks: 1,
            label_window_weeks: LABEL_WINDOW_WEEKS,
            stride_weeks: 1,
            feature_set: FeatureSet::DURATION_ATTEMPT_STATUS,
        }
    }
}

impl WindowSpec {
    pub fn total_weeks(&self) -> usize {
        self.n_features_weeks + self.n_offset_weeks + self.label_window_weeks
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features_weeks == 0 {
            return Err(Error::Config("n_features_weeks must be at least 1".into()));
        }
        if self.label_window_weeks != LABEL_WINDOW_WEEKS {
            return Err(Error::Config(format!("label_window_weeks is fixed at {LABEL_WINDOW_WEEKS}")));
        }
        if self.stride_weeks == 0 {
            return Err(Error::Config("stride_weeks must be at least 1".into()));
        }
        if self.feature_set.is_empty() {
            return Err(Error::Config("feature set is empty".into()));
        }
        Ok(())
    }

    /// `max(0, floor((T - L) / stride) + 1)`.
    pub fn window_count(&self, trajectory_weeks: usize) -> usize {
        let l = self.total_weeks();
        if trajectory_weeks < l {
            0
        } else {
            (trajectory_weeks - l) / self.stride_weeks + 1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub beneficiary_id: String,
    /// Message index of the window's first week.
    pub start_week: u32,
    /// Row-major `n_features_weeks x columns_per_week`.
    pub features: Vec<f64>,
    pub label_low_pickup: bool,
    pub label_low_engagement: bool,
}

fn check_label_weeks(weeks: &[WeeklySummary]) -> Result<()> {
    if weeks.len() != LABEL_WINDOW_WEEKS {
        return Err(Error::InvalidInput(format!(
            "label window has {} weeks, expected {LABEL_WINDOW_WEEKS}",
            weeks.len()
        )));
    }
    Ok(())
}

/// Fewer than three picked weeks among the six.
pub fn label_low_pickup(weeks: &[WeeklySummary]) -> Result<bool> {
    check_label_weeks(weeks)?;
    Ok(weeks.iter().filter(|w| w.picked).count() < LOW_LISTENERSHIP_CUT)
}

/// Fewer than three engaged weeks among the six.
pub fn label_low_engagement(weeks: &[WeeklySummary]) -> Result<bool> {
    check_label_weeks(weeks)?;
    Ok(weeks.iter().filter(|w| w.engaged).count() < LOW_LISTENERSHIP_CUT)
}

/// Which label a classifier predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    LowPickup,
    LowEngagement,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::LowPickup, Target::LowEngagement];

    pub fn name(self) -> &'static str {
        match self {
            Target::LowPickup => "low_pickup",
            Target::LowEngagement => "low_engagement",
        }
    }

    pub fn label(self, w: &FeatureWindow) -> bool {
        match self {
            Target::LowPickup => w.label_low_pickup,
            Target::LowEngagement => w.label_low_engagement,
        }
    }

    pub fn labels(self, windows: &[FeatureWindow]) -> Vec<bool> {
        windows.iter().map(|w| self.label(w)).collect()
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown target {s:?}")))
    }
}

/// All windows of one trajectory, in start order.
pub fn make_windows(t: &Trajectory, spec: &WindowSpec, n_slots: usize) -> Vec<FeatureWindow> {
    let l = spec.total_weeks();
    let count = spec.window_count(t.weeks.len());
    let label_start = spec.n_features_weeks + spec.n_offset_weeks;
    (0..count)
        .map(|i| {
            let window = &t.weeks[i * spec.stride_weeks..i * spec.stride_weeks + l];
            let mut features = Vec::with_capacity(spec.n_features_weeks * spec.feature_set.columns_per_week());
            for w in &window[..spec.n_features_weeks] {
                spec.feature_set.week_features(w, n_slots, &mut features);
            }
            let labels = &window[label_start..];
            FeatureWindow {
                beneficiary_id: t.beneficiary_id.clone(),
                start_week: window[0].message_index,
                features,
                label_low_pickup: label_low_pickup(labels).expect("label window length"),
                label_low_engagement: label_low_engagement(labels).expect("label window length"),
            }
        })
        .collect()
}

/// Windows for a set of beneficiaries, ordered by beneficiary id then start week.
pub fn windows_for<'a, I>(trajectories: I, spec: &WindowSpec, n_slots: usize) -> Vec<FeatureWindow>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let trajs: Vec<&Trajectory> = trajectories.into_iter().collect();
    let mut per: Vec<(String, Vec<FeatureWindow>)> = trajs
        .par_iter()
        .map(|t| (t.beneficiary_id.clone(), make_windows(t, spec, n_slots)))
        .collect();
    per.sort_by(|a, b| a.0.cmp(&b.0));
    per.into_iter().flat_map(|(_, w)| w).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }
}

/// Seeded shuffle of the sorted, de-duplicated ids; the first
/// `round(train_fraction * N)` go to train. Both halves come back sorted.
pub fn split_beneficiaries(ids: &[String], spec: &SplitSpec) -> Result<(Vec<String>, Vec<String>)> {
    spec.validate()?;
    let mut ids: Vec<String> = ids.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidInput(format!(
            "{n} beneficiaries at train_fraction {} leave one side empty",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let mut test = ids.split_off(n_train);
    ids.sort();
    test.sort();
    Ok((ids, test))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose training std is below 1e-12 and are left unscaled.
    pub passthrough: Vec<bool>,
}

pub const MIN_STD: f64 = 1e-12;

impl StandardizationStats {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty("no training rows to standardize".into()))?;
        let k = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; k];
        for r in rows {
            if r.len() != k {
                return Err(Error::Shape(format!("row of {} columns, expected {k}", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let passthrough = std.iter().map(|s| *s < MIN_STD).collect();
        Ok(Self { mean, std, passthrough })
    }

    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "row of {} columns, stats cover {}",
                row.len(),
                self.mean.len()
            )));
        }
        for (j, v) in row.iter_mut().enumerate() {
            if !self.passthrough[j] {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRole {
    Train,
    Test,
}

/// Z-scores window features in place. In training mode without stats, the
/// stats are fitted on these windows; test mode requires stats.
pub fn standardize(
    windows: &mut [FeatureWindow],
    stats: Option<StandardizationStats>,
    role: SplitRole,
) -> Result<StandardizationStats> {
    let stats = match (stats, role) {
        (Some(s), _) => s,
        (None, SplitRole::Train) => {
            let rows: Vec<&[f64]> = windows.iter().map(|w| w.features.as_slice()).collect();
            StandardizationStats::fit(&rows)?
        }
        (None, SplitRole::Test) => {
            return Err(Error::InvalidInput("test-mode standardization needs training stats".into()))
        }
    };
    for w in windows.iter_mut() {
        stats.apply_row(&mut w.features)?;
    }
    Ok(stats)
}

/// Train and test windows for one window spec.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub spec: WindowSpec,
    pub train: Vec<FeatureWindow>,
    pub test: Vec<FeatureWindow>,
    pub stats: StandardizationStats,
}

impl PreparedDataset {
    pub fn columns_per_week(&self) -> usize {
        self.spec.feature_set.columns_per_week()
    }

    pub fn n_columns(&self) -> usize {
        self.spec.n_features_weeks * self.columns_per_week()
    }
}

/// Windows the split beneficiaries and standardizes with train-only stats.
pub fn prepare_dataset(
    trajectories: &Trajectories,
    train_ids: &[String],
    test_ids: &[String],
    spec: &WindowSpec,
    n_slots: usize,
) -> Result<PreparedDataset> {
    spec.validate()?;
    let pick = |ids: &[String]| -> Vec<&Trajectory> { ids.iter().filter_map(|id| trajectories.get(id)).collect() };
    let mut train = windows_for(pick(train_ids), spec, n_slots);
    let mut test = windows_for(pick(test_ids), spec, n_slots);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty(format!(
            "window spec of {} weeks leaves {} train / {} test windows",
            spec.total_weeks(),
            train.len(),
            test.len()
        )));
    }
    let stats = standardize(&mut train, None, SplitRole::Train)?;
    standardize(&mut test, Some(stats.clone()), SplitRole::Test)?;
    Ok(PreparedDataset {
        spec: *spec,
        train,
        test,
        stats,
    })
}

pub fn write_windows_csv<W: Write>(windows: &[FeatureWindow], n_columns: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["beneficiary_id".to_string(), "start_week".to_string()];
    header.extend((0..n_columns).map(|j| format!("f_{j}")));
    header.push("label_low_pickup".into());
    header.push("label_low_engagement".into());
    w.write_record(&header)?;
    for win in windows {
        if win.features.len() != n_columns {
            return Err(Error::Shape(format!(
                "window has {} features, header has {n_columns}",
                win.features.len()
            )));
        }
        let mut row = Vec::with_capacity(n_columns + 4);
        row.push(win.beneficiary_id.clone());
        row.push(win.start_week.to_string());
        row.extend(win.features.iter().map(|v| format!("{v:?}")));
        row.push(u8::from(win.label_low_pickup).to_string());
        row.push(u8::from(win.label_low_engagement).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_windows_csv<R: Read>(input: R) -> Result<Vec<FeatureWindow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let n = headers.len();
    if n < 4 || &headers[0] != "beneficiary_id" || &headers[1] != "start_week" || &headers[n - 1] != "label_low_engagement" {
        return Err(Error::Header("not a window dataset".into()));
    }
    let parse_bool = |s: &str| -> Result<bool> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::InvalidInput(format!("label `{other}` is not 0/1"))),
        }
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let features = (2..n - 2)
            .map(|j| row[j].parse::<f64>().map_err(|_| Error::InvalidInput(format!("feature `{}`", &row[j]))))
            .collect::<Result<Vec<_>>>()?;
        out.push(FeatureWindow {
            beneficiary_id: row[0].to_string(),
            start_week: row[1].parse().map_err(|_| Error::InvalidInput(format!("start_week `{}`", &row[1])))?,
            features,
            label_low_pickup: parse_bool(&row[n - 2])?,
            label_low_engagement: parse_bool(&row[n - 1])?,
        });
    }
    Ok(out)
}
