//! Seeded synthetic call-record corpora with planted behavioural archetypes.
//!
//! # Random streams
//!
//! Every draw comes from ChaCha8 keyed by `seed`. Beneficiary `i` (0-based
//! ordinal over the archetype list, in order) reads ChaCha stream `i`. Within
//! that stream, beneficiary-level draws start at word position 0 and the draws
//! for program week `w` start at word position `w * 1024`. Each week consumes a
//! fixed number of draws whatever happens inside it, so two configs that
//! differ only in probabilities see the same uniforms attempt by attempt.

use chrono::{Datelike, Duration, NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CallAttemptRecord, TechnicalStatus, MAX_ATTEMPTS, MAX_ATTEMPT_DAYS, MAX_MESSAGE_INDEX};
use crate::slots::TimeSlotGrid;

const WORDS_PER_BLOCK: u128 = 1024;

/// Beneficiary counts of the four pickup x engagement quadrants, in
/// HPHE, HPLE, LPHE, LPLE order.
pub const REFERENCE_BUCKET_COUNTS: [usize; 4] = [1212, 2651, 1421, 6087];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRange {
    pub min: u32,
    pub max: u32,
}

/// Pickup suppression over a block of weeks-of-year, wrapping past week 53.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolidayDip {
    pub start_week: u32,
    pub length_weeks: u32,
    pub pickup_multiplier: f64,
}

impl HolidayDip {
    pub fn covers(&self, date: NaiveDate) -> bool {
        let week = week_of_year(date) as i64;
        (week - self.start_week as i64).rem_euclid(53) < self.length_weeks as i64
    }
}

/// Week of year in `1..=53`, counting 7-day blocks from January 1st.
pub fn week_of_year(date: NaiveDate) -> u32 {
    date.ordinal0() / 7 + 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeConfig {
    pub name: String,
    /// Chance that a connected attempt is answered, averaged over slots.
    pub pickup_prob_per_attempt: f64,
    pub engagement_prob_given_pickup: f64,
    /// Relative answering propensity per slot. Attempt times themselves are
    /// uniform over the grid; an attempt in slot `s` is answered with
    /// probability `pickup_prob * n_slots * slot_preference[s]`, capped at 1.
    pub slot_preference: Vec<f64>,
    pub technical_failure_prob: f64,
    pub trajectory_length_weeks: LengthRange,
    #[serde(default)]
    pub holiday_dip: Option<HolidayDip>,
    /// Relative weights of SwitchedOff, OutOfNetwork, OtherFailure.
    #[serde(default)]
    pub failure_weights: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeCount {
    pub archetype: ArchetypeConfig,
    pub count: usize,
}

fn default_max_attempts() -> u32 {
    MAX_ATTEMPTS
}
fn default_attempt_days() -> u32 {
    MAX_ATTEMPT_DAYS as u32
}
fn default_calendar_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date")
}
fn default_enrollment_spread_days() -> u32 {
    728
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub seed: u64,
    pub archetypes: Vec<ArchetypeCount>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_attempt_days")]
    pub attempt_days: u32,
    #[serde(default)]
    pub slot_grid: TimeSlotGrid,
    /// Earliest possible date of a beneficiary's program week 1.
    #[serde(default = "default_calendar_start")]
    pub calendar_start: NaiveDate,
    /// Week-1 dates are spread uniformly over this many days.
    #[serde(default = "default_enrollment_spread_days")]
    pub enrollment_spread_days: u32,
}

impl CohortConfig {
    pub fn total_beneficiaries(&self) -> usize {
        self.archetypes.iter().map(|a| a.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.slot_grid.validate()?;
        if !(1..=MAX_ATTEMPTS).contains(&self.max_attempts) {
            return Err(Error::Config(format!("max_attempts {} outside 1..=9", self.max_attempts)));
        }
        if self.attempt_days == 0 || self.attempt_days as usize > MAX_ATTEMPT_DAYS || self.attempt_days > self.max_attempts {
            return Err(Error::Config(format!(
                "attempt_days {} must be in 1..=4 and not exceed max_attempts",
                self.attempt_days
            )));
        }
        if self.enrollment_spread_days == 0 {
            return Err(Error::Config("enrollment_spread_days must be positive".into()));
        }
        if self.total_beneficiaries() == 0 {
            return Err(Error::Config("cohort has zero beneficiaries".into()));
        }
        let n_slots = self.slot_grid.n_slots();
        for ac in &self.archetypes {
            let a = &ac.archetype;
            let ctx = |msg: String| Error::Config(format!("archetype {}: {msg}", a.name));
            for (label, p) in [
                ("pickup_prob_per_attempt", a.pickup_prob_per_attempt),
                ("engagement_prob_given_pickup", a.engagement_prob_given_pickup),
                ("technical_failure_prob", a.technical_failure_prob),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ctx(format!("{label} {p} outside [0, 1]")));
                }
            }
            if a.slot_preference.len() != n_slots {
                return Err(ctx(format!(
                    "slot_preference has {} entries, grid has {n_slots} slots",
                    a.slot_preference.len()
                )));
            }
            if a.slot_preference.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(ctx("slot_preference entries must lie in [0, 1]".into()));
            }
            let sum: f64 = a.slot_preference.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ctx(format!("slot_preference sums to {sum}, not 1")));
            }
            let len = a.trajectory_length_weeks;
            if len.min == 0 || len.min > len.max || len.max > MAX_MESSAGE_INDEX {
                return Err(ctx(format!("trajectory length range {}..={} invalid", len.min, len.max)));
            }
            if let Some(dip) = &a.holiday_dip {
                if !(1..=53).contains(&dip.start_week) || !(dip.pickup_multiplier >= 0.0) {
                    return Err(ctx("holiday_dip needs start_week in 1..=53 and a non-negative multiplier".into()));
                }
            }
            if let Some(w) = &a.failure_weights {
                if w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                    return Err(ctx("failure_weights must be non-negative with a positive sum".into()));
                }
            }
        }
        Ok(())
    }
}

/// Ground truth for one generated beneficiary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub beneficiary_id: String,
    pub archetype: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCohort {
    pub records: Vec<CallAttemptRecord>,
    pub members: Vec<Member>,
}

pub fn beneficiary_id(ordinal: usize) -> String {
    format!("B{:06}", ordinal + 1)
}

/// Generates the cohort. Output is ordered by beneficiary ordinal, then week,
/// then attempt, and is identical for identical configs.
pub fn generate_cohort(config: &CohortConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let mut assignments = Vec::with_capacity(config.total_beneficiaries());
    for (arch_idx, ac) in config.archetypes.iter().enumerate() {
        assignments.extend(std::iter::repeat(arch_idx).take(ac.count));
    }

    let per_beneficiary: Vec<Vec<CallAttemptRecord>> = assignments
        .par_iter()
        .enumerate()
        .map(|(ordinal, &arch_idx)| simulate_beneficiary(config, ordinal, &config.archetypes[arch_idx].archetype))
        .collect();

    let members = assignments
        .iter()
        .enumerate()
        .map(|(ordinal, &arch_idx)| Member {
            beneficiary_id: beneficiary_id(ordinal),
            archetype: config.archetypes[arch_idx].archetype.name.clone(),
        })
        .collect();
    Ok(SyntheticCohort {
        records: per_beneficiary.into_iter().flatten().collect(),
        members,
    })
}

fn stream(seed: u64, ordinal: usize, block: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ordinal as u64);
    rng.set_word_pos(u128::from(block) * WORDS_PER_BLOCK);
    rng
}

struct AttemptDraws {
    fail: f64,
    kind: f64,
    pick: f64,
    slot: f64,
    within: f64,
}

fn simulate_beneficiary(config: &CohortConfig, ordinal: usize, arch: &ArchetypeConfig) -> Vec<CallAttemptRecord> {
    let id = beneficiary_id(ordinal);
    let grid = &config.slot_grid;
    let n_slots = grid.n_slots();

    let mut rng = stream(config.seed, ordinal, 0);
    let len_range = arch.trajectory_length_weeks;
    let length = rng.gen_range(len_range.min..=len_range.max);
    let first_week = rng.gen_range(1..=MAX_MESSAGE_INDEX - length + 1);
    let week1_date = config.calendar_start + Duration::days(i64::from(rng.gen_range(0..config.enrollment_spread_days)));

    let day_of_attempt = attempt_day_schedule(config.max_attempts, config.attempt_days);
    let mut out = Vec::new();

    for week in first_week..first_week + length {
        let mut rng = stream(config.seed, ordinal, week);
        let draws: Vec<AttemptDraws> = (0..MAX_ATTEMPTS)
            .map(|_| AttemptDraws {
                fail: rng.gen(),
                kind: rng.gen(),
                pick: rng.gen(),
                slot: rng.gen(),
                within: rng.gen(),
            })
            .collect();
        let engage_draw: f64 = rng.gen();
        let duration_draw: f64 = rng.gen();

        let week_start = week1_date + Duration::weeks(i64::from(week - 1));
        let mut times: Vec<(usize, u32)> = draws[..config.max_attempts as usize]
            .iter()
            .map(|d| {
                let slot = ((d.slot * n_slots as f64) as usize).min(n_slots - 1);
                let offset = ((d.within * f64::from(grid.slot_len_seconds())) as u32).min(grid.slot_len_seconds() - 1);
                (slot, grid.slot_start_seconds(slot) + offset)
            })
            .collect();
        // attempts on the same day happen in clock order
        let mut start = 0;
        while start < times.len() {
            let day = day_of_attempt[start];
            let end = day_of_attempt.iter().rposition(|d| *d == day).unwrap() + 1;
            times[start..end].sort_by_key(|t| t.1);
            start = end;
        }

        for (k, d) in draws[..config.max_attempts as usize].iter().enumerate() {
            let (slot, secs) = times[k];
            let date = week_start + Duration::days(day_of_attempt[k] as i64);
            let multiplier = match &arch.holiday_dip {
                Some(dip) if dip.covers(date) => dip.pickup_multiplier,
                _ => 1.0,
            };
            let (status, duration) = if d.fail < arch.technical_failure_prob {
                (failure_status(d.kind, arch.failure_weights.as_ref()), 0.0)
            } else {
                let answer = (arch.pickup_prob_per_attempt * n_slots as f64 * arch.slot_preference[slot] * multiplier).min(1.0);
                if d.pick < answer {
                    let engaged = engage_draw < arch.engagement_prob_given_pickup;
                    (TechnicalStatus::PickedUp, sample_duration(engaged, duration_draw))
                } else {
                    (TechnicalStatus::Busy, 0.0)
                }
            };
            out.push(CallAttemptRecord {
                beneficiary_id: id.clone(),
                message_index: week,
                attempt_number: k as u32 + 1,
                attempt_date: date,
                attempt_time: NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("in-day time"),
                status,
                duration_seconds: duration,
                gestation_week: None,
            });
            if status == TechnicalStatus::PickedUp {
                break;
            }
        }
    }
    out
}

/// Day index (0-based) of every attempt: contiguous blocks, earlier days
/// taking the remainder, e.g. 9 attempts over 4 days is 3,2,2,2.
pub fn attempt_day_schedule(max_attempts: u32, attempt_days: u32) -> Vec<usize> {
    let base = max_attempts / attempt_days;
    let extra = max_attempts % attempt_days;
    (0..attempt_days)
        .flat_map(|d| std::iter::repeat(d as usize).take((base + u32::from(d < extra)) as usize))
        .collect()
}

fn failure_status(draw: f64, weights: Option<&[f64; 3]>) -> TechnicalStatus {
    const KINDS: [TechnicalStatus; 3] = [
        TechnicalStatus::SwitchedOff,
        TechnicalStatus::OutOfNetwork,
        TechnicalStatus::OtherFailure,
    ];
    let w = weights.copied().unwrap_or([1.0; 3]);
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for (kind, weight) in KINDS.iter().zip(w) {
        acc += weight / total;
        if draw < acc {
            return *kind;
        }
    }
    // draw landed in the rounding tail
    KINDS[w.iter().rposition(|x| *x > 0.0).unwrap_or(2)]
}

/// Engaged pickups last (30, 90] seconds, others (0, 30], at 0.01 s resolution.
fn sample_duration(engaged: bool, draw: f64) -> f64 {
    let round = |x: f64| (x * 100.0).round() / 100.0;
    if engaged {
        round(30.0 + 60.0 * (1.0 - draw)).max(30.01)
    } else {
        round(30.0 * (1.0 - draw)).clamp(0.01, 30.0)
    }
}

/// Splits `total` in proportion to `weights` by largest remainder.
pub fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut counts: Vec<usize> = weights.iter().map(|w| total * w / sum).collect();
    let mut remainders: Vec<(usize, usize)> = weights.iter().enumerate().map(|(i, w)| (total * w % sum, i)).collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - counts.iter().sum::<usize>();
    for &(_, i) in remainders.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

pub const DEFAULT_SEED: u64 = 20220103;

/// Four archetypes, one per pickup x engagement quadrant, sized in the
/// proportions of [`REFERENCE_BUCKET_COUNTS`].
///
/// High-pickup archetypes stay enrolled 50-72 weeks; low-pickup ones 13-22.
/// With per-archetype answer and failure rates this puts roughly 23% of all
/// attempted beneficiary-weeks out of reach after nine attempts, gives HPHE a
/// technical success ratio near 0.9 and LPLE near 0.2, and plants a
/// first/last slot preference in the low-pickup archetypes.
pub fn default_bucket_archetypes(total_beneficiaries: usize) -> CohortConfig {
    let counts = apportion(total_beneficiaries, &REFERENCE_BUCKET_COUNTS);
    let dip = Some(HolidayDip {
        start_week: 52,
        length_weeks: 3,
        pickup_multiplier: 0.5,
    });
    let long = LengthRange { min: 54, max: 72 };
    let short = LengthRange { min: 11, max: 17 };
    let archetypes = vec![
        ArchetypeConfig {
            name: "HPHE".into(),
            pickup_prob_per_attempt: 0.75,
            engagement_prob_given_pickup: 0.88,
            slot_preference: vec![0.16, 0.13, 0.13, 0.13, 0.13, 0.19, 0.13],
            technical_failure_prob: 0.18,
            trajectory_length_weeks: long,
            holiday_dip: dip,
            failure_weights: None,
        },
        ArchetypeConfig {
            name: "HPLE".into(),
            pickup_prob_per_attempt: 0.7,
            engagement_prob_given_pickup: 0.15,
            slot_preference: vec![0.22, 0.15, 0.13, 0.12, 0.12, 0.13, 0.13],
            technical_failure_prob: 0.15,
            trajectory_length_weeks: long,
            holiday_dip: dip,
            failure_weights: None,
        },
        ArchetypeConfig {
            name: "LPHE".into(),
            pickup_prob_per_attempt: 0.085,
            engagement_prob_given_pickup: 0.96,
            slot_preference: vec![0.26, 0.16, 0.06, 0.06, 0.06, 0.16, 0.24],
            technical_failure_prob: 0.6,
            trajectory_length_weeks: short,
            holiday_dip: dip,
            failure_weights: None,
        },
        ArchetypeConfig {
            name: "LPLE".into(),
            pickup_prob_per_attempt: 0.175,
            engagement_prob_given_pickup: 0.02,
            slot_preference: vec![0.31, 0.08, 0.08, 0.08, 0.08, 0.08, 0.29],
            technical_failure_prob: 0.83,
            trajectory_length_weeks: short,
            holiday_dip: dip,
            failure_weights: None,
        },
    ];
    CohortConfig {
        seed: DEFAULT_SEED,
        archetypes: archetypes
            .into_iter()
            .zip(counts)
            .map(|(archetype, count)| ArchetypeCount { archetype, count })
            .collect(),
        max_attempts: MAX_ATTEMPTS,
        attempt_days: MAX_ATTEMPT_DAYS as u32,
        slot_grid: TimeSlotGrid::default(),
        calendar_start: default_calendar_start(),
        enrollment_spread_days: default_enrollment_spread_days(),
    }
}
