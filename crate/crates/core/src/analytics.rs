//! Cohort-level analyses over weekly trajectories: attempt efficacy,
//! pickup x engagement buckets and their weekly profiles, time-slot pickup
//! rates, and no-pickup gap scans.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Trajectory, WeeklySummary, MAX_ATTEMPTS, MAX_MESSAGE_INDEX};
pub use crate::slots::{assign_time_slot, SlotAssignment, TimeSlotGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    HPHE,
    HPLE,
    LPHE,
    LPLE,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::HPHE, Bucket::HPLE, Bucket::LPHE, Bucket::LPLE];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::HPHE => "HPHE",
            Bucket::HPLE => "HPLE",
            Bucket::LPHE => "LPHE",
            Bucket::LPLE => "LPLE",
        }
    }

    pub fn from_rates(high_pickup: bool, high_engagement: bool) -> Self {
        match (high_pickup, high_engagement) {
            (true, true) => Bucket::HPHE,
            (true, false) => Bucket::HPLE,
            (false, true) => Bucket::LPHE,
            (false, false) => Bucket::LPLE,
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Bucket {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Bucket::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown bucket `{s}`")))
    }
}

/// How a beneficiary's "listening trajectory" length is measured for screening.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMeasure {
    #[default]
    EngagedWeeks,
    AttemptedWeeks,
    EnrolledWeeks,
}

/// Denominator of a beneficiary's engagement rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementBase {
    /// Engaged weeks over picked-up weeks.
    #[default]
    PickedWeeks,
    /// Engaged weeks over attempted weeks.
    AttemptedWeeks,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketThresholds {
    pub pickup_rate_cut: f64,
    pub engagement_rate_cut: f64,
    pub long_trajectory_min_weeks: u32,
    pub short_trajectory_max_weeks: u32,
    pub trajectory_measure: TrajectoryMeasure,
    pub engagement_base: EngagementBase,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        Self {
            pickup_rate_cut: 0.5,
            engagement_rate_cut: 0.5,
            long_trajectory_min_weeks: 51,
            short_trajectory_max_weeks: 19,
            trajectory_measure: TrajectoryMeasure::EngagedWeeks,
            engagement_base: EngagementBase::PickedWeeks,
        }
    }
}

impl BucketThresholds {
    pub fn validate(&self) -> Result<()> {
        for cut in [self.pickup_rate_cut, self.engagement_rate_cut] {
            if !(0.0..=1.0).contains(&cut) {
                return Err(Error::Config(format!("bucket cut {cut} outside [0, 1]")));
            }
        }
        if self.short_trajectory_max_weeks >= self.long_trajectory_min_weeks {
            return Err(Error::Config("short_trajectory_max_weeks must be below long_trajectory_min_weeks".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficacyUnit {
    /// Every attempted beneficiary-week counts once.
    #[default]
    BeneficiaryWeek,
    /// Only each beneficiary's first attempted week counts.
    BeneficiaryFirstWeek,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficacyCurve {
    /// Share of units first reached at attempt `k + 1`.
    pub per_attempt_reach: Vec<f64>,
    pub cumulative_reach: Vec<f64>,
    pub never_reached: f64,
    pub n_units: usize,
}

pub fn attempt_efficacy<'a, I>(trajectories: I, unit: EfficacyUnit) -> Result<EfficacyCurve>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut first_pickup = [0u64; MAX_ATTEMPTS as usize];
    let mut unreached = 0u64;
    let mut total = 0u64;
    for t in trajectories {
        let weeks: Box<dyn Iterator<Item = &WeeklySummary>> = match unit {
            EfficacyUnit::BeneficiaryWeek => Box::new(t.attempted_weeks()),
            EfficacyUnit::BeneficiaryFirstWeek => Box::new(t.attempted_weeks().take(1)),
        };
        for w in weeks {
            total += 1;
            match w.first_pickup_attempt {
                Some(k) => first_pickup[(k - 1) as usize] += 1,
                None => unreached += 1,
            }
        }
    }
    if total == 0 {
        return Err(Error::Empty("no attempted beneficiary-weeks".into()));
    }
    let n = total as f64;
    let per_attempt_reach: Vec<f64> = first_pickup.iter().map(|c| *c as f64 / n).collect();
    let mut cumulative_reach = Vec::with_capacity(per_attempt_reach.len());
    let mut acc = 0.0;
    for r in &per_attempt_reach {
        acc += r;
        cumulative_reach.push(acc);
    }
    Ok(EfficacyCurve {
        per_attempt_reach,
        cumulative_reach,
        never_reached: unreached as f64 / n,
        n_units: total as usize,
    })
}

pub fn trajectory_length(t: &Trajectory, measure: TrajectoryMeasure) -> u32 {
    match measure {
        TrajectoryMeasure::EngagedWeeks => t.weeks.iter().filter(|w| w.engaged).count() as u32,
        TrajectoryMeasure::AttemptedWeeks => t.attempted_weeks().count() as u32,
        TrajectoryMeasure::EnrolledWeeks => t.enrollment_span() as u32,
    }
}

/// Keeps the long-listening and short-listening extremes.
pub fn screen_extremes<'a, I>(trajectories: I, thresholds: &BucketThresholds) -> Vec<&'a Trajectory>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    trajectories
        .into_iter()
        .filter(|t| {
            let len = trajectory_length(t, thresholds.trajectory_measure);
            len >= thresholds.long_trajectory_min_weeks || len <= thresholds.short_trajectory_max_weeks
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRates {
    pub pickup_rate: f64,
    pub engagement_rate: f64,
}

pub fn bucket_rates(t: &Trajectory, base: EngagementBase) -> Result<BucketRates> {
    let (mut attempted, mut picked, mut engaged) = (0u32, 0u32, 0u32);
    for w in t.attempted_weeks() {
        attempted += 1;
        picked += u32::from(w.picked);
        engaged += u32::from(w.engaged);
    }
    if attempted == 0 {
        return Err(Error::InvalidInput(format!("beneficiary {} has no attempted weeks", t.beneficiary_id)));
    }
    let denom = match base {
        EngagementBase::PickedWeeks => picked,
        EngagementBase::AttemptedWeeks => attempted,
    };
    Ok(BucketRates {
        pickup_rate: f64::from(picked) / f64::from(attempted),
        engagement_rate: if denom == 0 { 0.0 } else { f64::from(engaged) / f64::from(denom) },
    })
}

/// Rates at or above a cut count as High.
pub fn bucket_assign(t: &Trajectory, thresholds: &BucketThresholds) -> Result<Bucket> {
    let r = bucket_rates(t, thresholds.engagement_base)?;
    Ok(bucket_for_rates(&r, thresholds))
}

pub fn bucket_for_rates(r: &BucketRates, thresholds: &BucketThresholds) -> Bucket {
    Bucket::from_rates(
        r.pickup_rate >= thresholds.pickup_rate_cut,
        r.engagement_rate >= thresholds.engagement_rate_cut,
    )
}

/// Per-message-index aggregate for a group of beneficiaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub message_index: u32,
    pub n_attempted: u32,
    pub n_picked: u32,
    pub mean_pickup_rate: f64,
    pub modal_pickup_day: Option<u8>,
    pub mean_technical_success: f64,
    pub modal_pickup_slot: Option<u8>,
    /// Mean picked-up duration over picked weeks.
    pub mean_duration: Option<f64>,
    pub engaged: Option<bool>,
    pub modal_pickup_weekday: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketProfile {
    pub n_beneficiaries: usize,
    pub rows: Vec<ProfileRow>,
}

impl BucketProfile {
    /// Technical success ratio pooled over every attempted beneficiary-week.
    pub fn pooled_technical_success(&self) -> f64 {
        let (num, den) = self.rows.iter().fold((0.0, 0.0), |(n, d), r| {
            (n + r.mean_technical_success * f64::from(r.n_attempted), d + f64::from(r.n_attempted))
        });
        num / den
    }

    pub fn pooled_pickup_rate(&self) -> f64 {
        let picked: u32 = self.rows.iter().map(|r| r.n_picked).sum();
        let attempted: u32 = self.rows.iter().map(|r| r.n_attempted).sum();
        f64::from(picked) / f64::from(attempted)
    }
}

#[derive(Default)]
struct ProfileAcc {
    attempted: u32,
    picked: u32,
    success_sum: f64,
    duration_sum: f64,
    days: [u32; 4],
    slots: Vec<u32>,
    weekdays: [u32; 7],
}

/// Mode with ties broken toward the smaller index; `None` when all zero.
fn mode(counts: &[u32]) -> Option<u8> {
    let mut best: Option<(usize, u32)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i as u8)
}

/// The six weekly panels of a bucket: pickup rate, modal pickup day,
/// technical success, modal slot, mean duration with engaged flag and modal
/// weekday. Rows cover message indices with at least one attempted week.
pub fn bucket_profile<'a, I>(trajectories: I, grid: &TimeSlotGrid, engagement_threshold: f64) -> Result<BucketProfile>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let n_slots = grid.n_slots();
    let mut acc: BTreeMap<u32, ProfileAcc> = BTreeMap::new();
    let mut n_beneficiaries = 0;
    for t in trajectories {
        n_beneficiaries += 1;
        for w in t.attempted_weeks() {
            let a = acc.entry(w.message_index).or_insert_with(|| ProfileAcc {
                slots: vec![0; n_slots],
                ..Default::default()
            });
            a.attempted += 1;
            a.success_sum += w.technical_success_ratio;
            if w.picked {
                a.picked += 1;
                a.duration_sum += w.total_duration_seconds;
                if let Some(d) = w.pickup_attempt_day {
                    a.days[(d - 1) as usize] += 1;
                }
                if let Some(s) = w.pickup_slot {
                    if (s as usize) < n_slots {
                        a.slots[s as usize] += 1;
                    }
                }
                if let Some(wd) = w.pickup_weekday {
                    a.weekdays[wd as usize] += 1;
                }
            }
        }
    }
    if n_beneficiaries == 0 {
        return Err(Error::Empty("bucket has no beneficiaries".into()));
    }
    debug_assert!(acc.keys().all(|k| *k <= MAX_MESSAGE_INDEX));
    let rows = acc
        .into_iter()
        .map(|(message_index, a)| {
            let mean_duration = (a.picked > 0).then(|| a.duration_sum / f64::from(a.picked));
            ProfileRow {
                message_index,
                n_attempted: a.attempted,
                n_picked: a.picked,
                mean_pickup_rate: f64::from(a.picked) / f64::from(a.attempted),
                modal_pickup_day: mode(&a.days).map(|d| d + 1),
                mean_technical_success: a.success_sum / f64::from(a.attempted),
                modal_pickup_slot: mode(&a.slots),
                mean_duration,
                engaged: mean_duration.map(|d| d > engagement_threshold),
                modal_pickup_weekday: mode(&a.weekdays),
            }
        })
        .collect();
    Ok(BucketProfile { n_beneficiaries, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRates {
    pub attempts: Vec<u64>,
    pub pickups: Vec<u64>,
    pub outside_attempts: u64,
    pub outside_pickups: u64,
}

impl SlotRates {
    /// `None` for a slot with no attempts.
    pub fn rate(&self, slot: usize) -> Option<f64> {
        (self.attempts[slot] > 0).then(|| self.pickups[slot] as f64 / self.attempts[slot] as f64)
    }

    pub fn rates(&self) -> Vec<Option<f64>> {
        (0..self.attempts.len()).map(|s| self.rate(s)).collect()
    }

    pub fn total_attempts(&self) -> u64 {
        self.attempts.iter().sum::<u64>() + self.outside_attempts
    }
}

/// Attempt-level pickup rate per slot.
pub fn slot_pickup_rates<'a, I>(trajectories: I, grid: &TimeSlotGrid) -> Result<SlotRates>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let n = grid.n_slots();
    let mut out = SlotRates {
        attempts: vec![0; n],
        pickups: vec![0; n],
        outside_attempts: 0,
        outside_pickups: 0,
    };
    for t in trajectories {
        for w in &t.weeks {
            for a in &w.attempts {
                let picked = u64::from(a.status == crate::ingest::TechnicalStatus::PickedUp);
                match grid.assign(a.time) {
                    SlotAssignment::Slot(s) => {
                        out.attempts[s] += 1;
                        out.pickups[s] += picked;
                    }
                    SlotAssignment::OutsideGrid => {
                        out.outside_attempts += 1;
                        out.outside_pickups += picked;
                    }
                }
            }
        }
    }
    if out.attempts.iter().all(|c| *c == 0) {
        return Err(Error::Empty("no attempts inside the slot grid".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapEvent {
    pub beneficiary_id: String,
    pub start_week: u32,
    pub end_week: u32,
    pub length: u32,
    /// The run had attempts and every one of them failed technically.
    pub technical_failure_driven: bool,
}

/// Maximal runs of at least `gap_weeks` consecutive not-picked weeks.
pub fn dropout_gap_scan(t: &Trajectory, gap_weeks: u32) -> Vec<GapEvent> {
    let mut events = Vec::new();
    let mut i = 0;
    let weeks = &t.weeks;
    while i < weeks.len() {
        if weeks[i].picked {
            i += 1;
            continue;
        }
        let start = i;
        while i < weeks.len() && !weeks[i].picked {
            i += 1;
        }
        let run = &weeks[start..i];
        if run.len() as u32 >= gap_weeks.max(1) {
            let attempted = run.iter().any(|w| w.n_attempts > 0);
            let driven = attempted && run.iter().all(|w| w.n_attempts == 0 || w.all_technical_failures());
            events.push(GapEvent {
                beneficiary_id: t.beneficiary_id.clone(),
                start_week: run[0].message_index,
                end_week: run[run.len() - 1].message_index,
                length: run.len() as u32,
                technical_failure_driven: driven,
            });
        }
    }
    events
}

// ---- CSV exports ----

pub fn write_efficacy_csv<W: Write>(curve: &EfficacyCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attempt", "reach", "cumulative"])?;
    for (k, (r, c)) in curve.per_attempt_reach.iter().zip(&curve.cumulative_reach).enumerate() {
        w.write_record([(k + 1).to_string(), format!("{r:?}"), format!("{c:?}")])?;
    }
    w.flush()?;
    Ok(())
}

pub struct BucketRow<'a> {
    pub beneficiary_id: &'a str,
    pub bucket: Bucket,
    pub rates: BucketRates,
}

pub fn write_buckets_csv<W: Write>(rows: &[BucketRow<'_>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beneficiary_id", "bucket", "pickup_rate", "engagement_rate"])?;
    for r in rows {
        w.write_record([
            r.beneficiary_id.to_string(),
            r.bucket.to_string(),
            format!("{:?}", r.rates.pickup_rate),
            format!("{:?}", r.rates.engagement_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_profile_csv<W: Write>(profile: &BucketProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "message_index",
        "n_attempted",
        "n_picked",
        "mean_pickup_rate",
        "modal_pickup_day",
        "mean_technical_success",
        "modal_pickup_slot",
        "mean_duration",
        "engaged",
        "modal_pickup_weekday",
    ])?;
    for r in &profile.rows {
        w.write_record([
            r.message_index.to_string(),
            r.n_attempted.to_string(),
            r.n_picked.to_string(),
            format!("{:?}", r.mean_pickup_rate),
            opt(r.modal_pickup_day),
            format!("{:?}", r.mean_technical_success),
            opt(r.modal_pickup_slot),
            r.mean_duration.map(|d| format!("{d:?}")).unwrap_or_default(),
            opt(r.engaged.map(u8::from)),
            opt(r.modal_pickup_weekday),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per slot plus a trailing `OUTSIDE` row; absent rates are empty.
pub fn write_slots_csv<W: Write>(rates: &SlotRates, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "attempts", "pickups", "rate"])?;
    for s in 0..rates.attempts.len() {
        w.write_record([
            s.to_string(),
            rates.attempts[s].to_string(),
            rates.pickups[s].to_string(),
            rates.rate(s).map(|r| format!("{r:?}")).unwrap_or_default(),
        ])?;
    }
    let outside_rate = (rates.outside_attempts > 0).then(|| rates.outside_pickups as f64 / rates.outside_attempts as f64);
    w.write_record([
        "OUTSIDE".to_string(),
        rates.outside_attempts.to_string(),
        rates.outside_pickups.to_string(),
        outside_rate.map(|r| format!("{r:?}")).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_gaps_csv<W: Write>(events: &[GapEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beneficiary_id", "start_week", "end_week", "length", "technical_failure_driven"])?;
    for e in events {
        w.write_record([
            e.beneficiary_id.clone(),
            e.start_week.to_string(),
            e.end_week.to_string(),
            e.length.to_string(),
            u8::from(e.technical_failure_driven).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
