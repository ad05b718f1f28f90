//! Call-detail record parsing and per-beneficiary weekly rollups.
//!
//! Raw attempts are grouped by `(beneficiary_id, message_index)` and reduced to
//! one [`WeeklySummary`] per program week. Weeks between a beneficiary's first
//! and last observed message are zero-filled; nothing is extrapolated past
//! either end.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, NaiveTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slots::TimeSlotGrid;

pub const MAX_MESSAGE_INDEX: u32 = 72;
pub const MAX_ATTEMPTS: u32 = 9;
pub const MAX_ATTEMPT_DAYS: usize = 4;

const REQUIRED_COLUMNS: [&str; 7] = [
    "beneficiary_id",
    "message_index",
    "attempt_number",
    "attempt_date",
    "attempt_time",
    "status",
    "duration_seconds",
];
const GESTATION_COLUMN: &str = "gestation_week";

const DATE_FORMAT: &str = "%Y-%m-%d";
const TIME_FORMAT: &str = "%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TechnicalStatus {
    PickedUp,
    Busy,
    SwitchedOff,
    OutOfNetwork,
    OtherFailure,
}

impl TechnicalStatus {
    pub const ALL: [TechnicalStatus; 5] = [
        TechnicalStatus::PickedUp,
        TechnicalStatus::Busy,
        TechnicalStatus::SwitchedOff,
        TechnicalStatus::OutOfNetwork,
        TechnicalStatus::OtherFailure,
    ];

    /// Position in [`TechnicalStatus::ALL`]; also the status-count column order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            TechnicalStatus::PickedUp => "PICKED_UP",
            TechnicalStatus::Busy => "BUSY",
            TechnicalStatus::SwitchedOff => "SWITCHED_OFF",
            TechnicalStatus::OutOfNetwork => "OUT_OF_NETWORK",
            TechnicalStatus::OtherFailure => "OTHER",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.token() == token)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallAttemptRecord {
    pub beneficiary_id: String,
    pub message_index: u32,
    pub attempt_number: u32,
    pub attempt_date: NaiveDate,
    pub attempt_time: NaiveTime,
    pub status: TechnicalStatus,
    pub duration_seconds: f64,
    /// Carried through ingestion; never used as a model feature.
    pub gestation_week: Option<u32>,
}

/// A rejected input row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedRecords {
    pub records: Vec<CallAttemptRecord>,
    pub errors: Vec<RowError>,
}

/// Parses the call-record CSV. A missing or malformed header is fatal; every
/// other problem rejects only its row and is reported with its line number.
pub fn parse_call_records<R: Read>(input: R) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = reader.headers()?.clone();
    let has_gestation = check_header(&headers)?;
    let expected_fields = if has_gestation { 8 } else { 7 };

    let mut out = ParsedRecords::default();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                match parse_row(&row, expected_fields) {
                    Ok(record) => out.records.push(record),
                    Err(reason) => out.errors.push(RowError { line, reason }),
                }
            }
            Err(err) => {
                let line = err.position().map_or(0, |p| p.line());
                match err.kind() {
                    csv::ErrorKind::Utf8 { .. } => out.errors.push(RowError {
                        line,
                        reason: "row is not valid UTF-8".into(),
                    }),
                    _ => return Err(err.into()),
                }
            }
        }
    }
    Ok(out)
}

fn check_header(headers: &csv::StringRecord) -> Result<bool> {
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < REQUIRED_COLUMNS.len() || names[..7] != REQUIRED_COLUMNS {
        return Err(Error::Header(format!(
            "expected `{}[,{}]`, found `{}`",
            REQUIRED_COLUMNS.join(","),
            GESTATION_COLUMN,
            names.join(",")
        )));
    }
    match names.len() {
        7 => Ok(false),
        8 if names[7] == GESTATION_COLUMN => Ok(true),
        _ => Err(Error::Header(format!(
            "unexpected trailing columns: `{}`",
            names[7..].join(",")
        ))),
    }
}

fn parse_row(row: &csv::StringRecord, expected_fields: usize) -> std::result::Result<CallAttemptRecord, String> {
    if row.len() != expected_fields {
        return Err(format!("expected {expected_fields} fields, found {}", row.len()));
    }
    let beneficiary_id = row[0].to_string();
    if beneficiary_id.is_empty() {
        return Err("empty beneficiary_id".into());
    }
    let message_index: u32 = row[1]
        .parse()
        .map_err(|_| format!("message_index `{}` is not an integer", &row[1]))?;
    if !(1..=MAX_MESSAGE_INDEX).contains(&message_index) {
        return Err(format!("message_index {message_index} outside 1..={MAX_MESSAGE_INDEX}"));
    }
    let attempt_number: u32 = row[2]
        .parse()
        .map_err(|_| format!("attempt_number `{}` is not an integer", &row[2]))?;
    if !(1..=MAX_ATTEMPTS).contains(&attempt_number) {
        return Err(format!("attempt_number {attempt_number} outside 1..={MAX_ATTEMPTS}"));
    }
    let attempt_date = NaiveDate::parse_from_str(&row[3], DATE_FORMAT)
        .map_err(|_| format!("attempt_date `{}` is not YYYY-MM-DD", &row[3]))?;
    let attempt_time = NaiveTime::parse_from_str(&row[4], TIME_FORMAT)
        .map_err(|_| format!("attempt_time `{}` is not HH:MM:SS", &row[4]))?;
    let status = TechnicalStatus::from_token(&row[5])
        .ok_or_else(|| format!("unknown status `{}`", &row[5]))?;
    let duration_seconds: f64 = row[6]
        .parse()
        .map_err(|_| format!("duration_seconds `{}` is not a number", &row[6]))?;
    if !duration_seconds.is_finite() || duration_seconds < 0.0 {
        return Err(format!("duration_seconds {duration_seconds} must be finite and non-negative"));
    }
    if duration_seconds > 0.0 && status != TechnicalStatus::PickedUp {
        return Err(format!(
            "duration {duration_seconds} with status {} (only PICKED_UP may have duration)",
            status.token()
        ));
    }
    let gestation_week = match row.get(7) {
        None | Some("") => None,
        Some(raw) => Some(
            raw.parse()
                .map_err(|_| format!("gestation_week `{raw}` is not an integer"))?,
        ),
    };
    Ok(CallAttemptRecord {
        beneficiary_id,
        message_index,
        attempt_number,
        attempt_date,
        attempt_time,
        status,
        duration_seconds,
        gestation_week,
    })
}

/// Writes records in the ingest schema. The gestation column is emitted only
/// when at least one record carries it.
pub fn write_call_records<W: Write>(records: &[CallAttemptRecord], out: W) -> Result<()> {
    let with_gestation = records.iter().any(|r| r.gestation_week.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    if with_gestation {
        header.push(GESTATION_COLUMN);
    }
    w.write_record(&header)?;
    for r in records {
        let mut fields = vec![
            r.beneficiary_id.clone(),
            r.message_index.to_string(),
            r.attempt_number.to_string(),
            r.attempt_date.format(DATE_FORMAT).to_string(),
            r.attempt_time.format(TIME_FORMAT).to_string(),
            r.status.token().to_string(),
            format!("{:?}", r.duration_seconds),
        ];
        if with_gestation {
            fields.push(r.gestation_week.map(|g| g.to_string()).unwrap_or_default());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_row_errors<W: Write>(errors: &[RowError], mut out: W) -> Result<()> {
    for e in errors {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Settings that turn raw attempts into weekly summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    /// A week is engaged when picked-up duration is strictly greater than this.
    pub engagement_threshold: f64,
    /// Statuses counted as a technically successful attempt.
    pub technical_success: Vec<TechnicalStatus>,
    pub grid: TimeSlotGrid,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            engagement_threshold: 30.0,
            technical_success: vec![TechnicalStatus::PickedUp, TechnicalStatus::Busy],
            grid: TimeSlotGrid::default(),
        }
    }
}

impl SummaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.engagement_threshold.is_finite() || self.engagement_threshold < 0.0 {
            return Err(Error::Config(format!(
                "engagement_threshold {} must be finite and non-negative",
                self.engagement_threshold
            )));
        }
        self.grid.validate()
    }

    pub fn is_technical_success(&self, status: TechnicalStatus) -> bool {
        self.technical_success.contains(&status)
    }
}

/// One attempt as kept inside a [`WeeklySummary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt_number: u32,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub status: TechnicalStatus,
    pub duration_seconds: f64,
    pub gestation_week: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeeklySummary {
    pub beneficiary_id: String,
    pub message_index: u32,
    pub total_duration_seconds: f64,
    pub n_attempts: u32,
    /// Indexed by [`TechnicalStatus::index`].
    pub status_counts: [u32; 5],
    pub picked: bool,
    pub engaged: bool,
    /// Attempt number of the first pickup.
    pub first_pickup_attempt: Option<u32>,
    /// 1-based position of the pickup's calendar day among the week's attempt days.
    pub pickup_attempt_day: Option<u8>,
    pub pickup_slot: Option<u8>,
    /// 0 = Monday.
    pub pickup_weekday: Option<u8>,
    pub technical_success_ratio: f64,
    /// Chronological (date, time, attempt number).
    pub attempts: Vec<AttemptLog>,
}

impl WeeklySummary {
    pub fn empty(beneficiary_id: &str, message_index: u32) -> Self {
        Self {
            beneficiary_id: beneficiary_id.to_string(),
            message_index,
            total_duration_seconds: 0.0,
            n_attempts: 0,
            status_counts: [0; 5],
            picked: false,
            engaged: false,
            first_pickup_attempt: None,
            pickup_attempt_day: None,
            pickup_slot: None,
            pickup_weekday: None,
            technical_success_ratio: 0.0,
            attempts: Vec::new(),
        }
    }

    pub fn first_attempt_date(&self) -> Option<NaiveDate> {
        self.attempts.first().map(|a| a.date)
    }

    /// Attempted, and every attempt was a technical failure.
    pub fn all_technical_failures(&self) -> bool {
        self.n_attempts > 0 && self.technical_success_ratio == 0.0
    }

    /// The seven per-week model features: total duration, attempt count,
    /// then the five status counts.
    pub fn model_features(&self) -> [f64; 7] {
        let c = &self.status_counts;
        [
            self.total_duration_seconds,
            f64::from(self.n_attempts),
            f64::from(c[0]),
            f64::from(c[1]),
            f64::from(c[2]),
            f64::from(c[3]),
            f64::from(c[4]),
        ]
    }
}

/// Rolls one beneficiary-week of attempts into a summary. An empty slice
/// yields the zero-attempt summary.
pub fn summarize_week(
    beneficiary_id: &str,
    message_index: u32,
    attempts: &[CallAttemptRecord],
    config: &SummaryConfig,
) -> Result<WeeklySummary> {
    let mut summary = WeeklySummary::empty(beneficiary_id, message_index);
    if let Some(r) = attempts
        .iter()
        .find(|r| r.beneficiary_id != beneficiary_id || r.message_index != message_index)
    {
        return Err(Error::InvalidInput(format!(
            "attempt for ({}, {}) passed to week ({beneficiary_id}, {message_index})",
            r.beneficiary_id, r.message_index
        )));
    }
    if attempts.is_empty() {
        return Ok(summary);
    }

    let mut log: Vec<AttemptLog> = attempts
        .iter()
        .map(|r| AttemptLog {
            attempt_number: r.attempt_number,
            date: r.attempt_date,
            time: r.attempt_time,
            status: r.status,
            duration_seconds: r.duration_seconds,
            gestation_week: r.gestation_week,
        })
        .collect();
    log.sort_by(|a, b| (a.date, a.time, a.attempt_number).cmp(&(b.date, b.time, b.attempt_number)));

    let mut days: Vec<NaiveDate> = log.iter().map(|a| a.date).collect();
    days.dedup();
    if days.len() > MAX_ATTEMPT_DAYS {
        return Err(Error::TooManyAttemptDays {
            beneficiary_id: beneficiary_id.to_string(),
            message_index,
            days: days.len(),
        });
    }

    let mut successes = 0u32;
    for a in &log {
        summary.status_counts[a.status.index()] += 1;
        if config.is_technical_success(a.status) {
            successes += 1;
        }
        if a.status == TechnicalStatus::PickedUp {
            summary.total_duration_seconds += a.duration_seconds;
        }
    }
    summary.n_attempts = log.len() as u32;
    summary.technical_success_ratio = f64::from(successes) / f64::from(summary.n_attempts);
    summary.picked = summary.status_counts[TechnicalStatus::PickedUp.index()] > 0;
    summary.engaged = summary.picked && summary.total_duration_seconds > config.engagement_threshold;

    if let Some(first) = log.iter().find(|a| a.status == TechnicalStatus::PickedUp) {
        summary.first_pickup_attempt = Some(first.attempt_number);
        let day = days.iter().position(|d| *d == first.date).unwrap_or(0);
        summary.pickup_attempt_day = Some(day as u8 + 1);
        summary.pickup_slot = config.grid.assign(first.time).slot().map(|s| s as u8);
        summary.pickup_weekday = Some(first.date.weekday().num_days_from_monday() as u8);
    }
    summary.attempts = log;
    Ok(summary)
}

/// A beneficiary's contiguous weekly history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub beneficiary_id: String,
    pub weeks: Vec<WeeklySummary>,
}

impl Trajectory {
    /// Weeks from first to last observed message, inclusive.
    pub fn enrollment_span(&self) -> usize {
        self.weeks.len()
    }

    pub fn attempted_weeks(&self) -> impl Iterator<Item = &WeeklySummary> {
        self.weeks.iter().filter(|w| w.n_attempts > 0)
    }

    /// Reconstructs the call records this trajectory was built from.
    pub fn records(&self) -> impl Iterator<Item = CallAttemptRecord> + '_ {
        self.weeks.iter().flat_map(move |w| {
            w.attempts.iter().map(move |a| CallAttemptRecord {
                beneficiary_id: self.beneficiary_id.clone(),
                message_index: w.message_index,
                attempt_number: a.attempt_number,
                attempt_date: a.date,
                attempt_time: a.time,
                status: a.status,
                duration_seconds: a.duration_seconds,
                gestation_week: a.gestation_week,
            })
        })
    }
}

pub type Trajectories = BTreeMap<String, Trajectory>;

/// Groups validated records into one zero-filled trajectory per beneficiary.
/// The result does not depend on input order.
pub fn build_trajectories(records: &[CallAttemptRecord], config: &SummaryConfig) -> Result<Trajectories> {
    let mut grouped: BTreeMap<&str, BTreeMap<u32, Vec<&CallAttemptRecord>>> = BTreeMap::new();
    for r in records {
        grouped
            .entry(r.beneficiary_id.as_str())
            .or_default()
            .entry(r.message_index)
            .or_default()
            .push(r);
    }

    for (id, weeks) in grouped.iter_mut() {
        for (week, attempts) in weeks.iter_mut() {
            attempts.sort_by_key(|r| r.attempt_number);
            if let Some(pair) = attempts.windows(2).find(|p| p[0].attempt_number == p[1].attempt_number) {
                return Err(Error::DuplicateAttempt {
                    beneficiary_id: id.to_string(),
                    message_index: *week,
                    attempt_number: pair[0].attempt_number,
                });
            }
        }
    }

    let grouped: Vec<_> = grouped.into_iter().collect();
    let built: Vec<Trajectory> = grouped
        .par_iter()
        .map(|(id, weeks)| build_one(id, weeks, config))
        .collect::<Result<_>>()?;
    Ok(built
        .into_iter()
        .map(|t| (t.beneficiary_id.clone(), t))
        .collect())
}

fn build_one(
    id: &str,
    weeks: &BTreeMap<u32, Vec<&CallAttemptRecord>>,
    config: &SummaryConfig,
) -> Result<Trajectory> {
    let first = *weeks.keys().next().expect("beneficiary with no weeks");
    let last = *weeks.keys().next_back().expect("beneficiary with no weeks");
    let mut out = Vec::with_capacity((last - first + 1) as usize);
    for week in first..=last {
        match weeks.get(&week) {
            Some(attempts) => {
                let owned: Vec<CallAttemptRecord> = attempts.iter().map(|r| (*r).clone()).collect();
                out.push(summarize_week(id, week, &owned, config)?);
            }
            None => out.push(WeeklySummary::empty(id, week)),
        }
    }
    Ok(Trajectory {
        beneficiary_id: id.to_string(),
        weeks: out,
    })
}

/// Writes every trajectory's attempts back out in the ingest schema.
pub fn write_trajectories_csv<W: Write>(trajectories: &Trajectories, out: W) -> Result<()> {
    let records: Vec<CallAttemptRecord> = trajectories.values().flat_map(|t| t.records()).collect();
    write_call_records(&records, out)
}

/// One row per beneficiary-week, zero-filled weeks included.
pub fn write_weekly_csv<W: Write>(trajectories: &Trajectories, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "beneficiary_id",
        "message_index",
        "total_duration_seconds",
        "n_attempts",
        "picked_up",
        "busy",
        "switched_off",
        "out_of_network",
        "other",
        "picked",
        "engaged",
        "pickup_attempt_day",
        "pickup_slot",
        "pickup_weekday",
        "technical_success_ratio",
    ])?;
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    for t in trajectories.values() {
        for s in &t.weeks {
            let c = &s.status_counts;
            w.write_record([
                s.beneficiary_id.clone(),
                s.message_index.to_string(),
                format!("{:?}", s.total_duration_seconds),
                s.n_attempts.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
                c[3].to_string(),
                c[4].to_string(),
                u8::from(s.picked).to_string(),
                u8::from(s.engaged).to_string(),
                opt(s.pickup_attempt_day),
                opt(s.pickup_slot),
                opt(s.pickup_weekday),
                format!("{:?}", s.technical_success_ratio),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "beneficiary_id,message_index,attempt_number,attempt_date,attempt_time,status,duration_seconds\n";

    fn parse(body: &str) -> ParsedRecords {
        parse_call_records(format!("{HEADER}{body}").as_bytes()).unwrap()
    }

    fn rec(id: &str, week: u32, attempt: u32, date: &str, time: &str, status: TechnicalStatus, dur: f64) -> CallAttemptRecord {
        CallAttemptRecord {
            beneficiary_id: id.into(),
            message_index: week,
            attempt_number: attempt,
            attempt_date: NaiveDate::parse_from_str(date, DATE_FORMAT).unwrap(),
            attempt_time: NaiveTime::parse_from_str(time, TIME_FORMAT).unwrap(),
            status,
            duration_seconds: dur,
            gestation_week: None,
        }
    }

    #[test]
    fn parses_picked_up_row() {
        let out = parse("B001,12,1,2022-01-03,09:15:00,PICKED_UP,95.0\n");
        assert!(out.errors.is_empty());
        let r = &out.records[0];
        assert_eq!(r.beneficiary_id, "B001");
        assert_eq!(r.message_index, 12);
        assert_eq!(r.attempt_number, 1);
        assert_eq!(r.status, TechnicalStatus::PickedUp);
        assert_eq!(r.duration_seconds, 95.0);
        assert_eq!(TimeSlotGrid::default().assign(r.attempt_time).slot(), Some(0));
    }

    #[test]
    fn busy_with_duration_is_rejected() {
        let out = parse("B001,12,1,2022-01-03,09:15:00,BUSY,10.0\n");
        assert!(out.records.is_empty());
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 2);
    }

    #[test]
    fn header_only_is_empty() {
        let out = parse("");
        assert!(out.records.is_empty());
        assert!(out.errors.is_empty());
    }

    #[test]
    fn missing_header_is_fatal() {
        let err = parse_call_records("B001,12,1,2022-01-03,09:15:00,PICKED_UP,95.0\n".as_bytes());
        assert!(matches!(err, Err(Error::Header(_))));
        assert!(matches!(parse_call_records(&b""[..]), Err(Error::Header(_))));
    }

    #[test]
    fn row_errors_keep_line_numbers_and_order() {
        let out = parse(
            "B1,1,1,2022-01-03,09:00:00,BUSY,0\n\
             B1,1,2,2022-01-03,10:00:00,RINGING,0\n\
             B1,73,1,2022-01-03,10:00:00,BUSY,0\n\
             B1,1,10,2022-01-03,10:00:00,BUSY,0\n\
             B1,2,1,2022-01-10,25:00:00,BUSY,0\n\
             B1,2,2,2022-01-10,11:00:00,PICKED_UP,-1\n\
             B1,3,1,2022-01-17,11:00:00,PICKED_UP,40\n",
        );
        let lines: Vec<u64> = out.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7]);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].message_index, 1);
        assert_eq!(out.records[1].message_index, 3);
    }

    #[test]
    fn optional_gestation_column() {
        let csv = "beneficiary_id,message_index,attempt_number,attempt_date,attempt_time,status,duration_seconds,gestation_week\n\
                   B1,1,1,2022-01-03,09:00:00,PICKED_UP,40,22\n\
                   B1,2,1,2022-01-10,09:00:00,BUSY,0,\n";
        let out = parse_call_records(csv.as_bytes()).unwrap();
        assert!(out.errors.is_empty());
        assert_eq!(out.records[0].gestation_week, Some(22));
        assert_eq!(out.records[1].gestation_week, None);

        let mut buf = Vec::new();
        write_call_records(&out.records, &mut buf).unwrap();
        let again = parse_call_records(buf.as_slice()).unwrap();
        assert_eq!(again.records, out.records);
    }

    #[test]
    fn three_attempt_week_rollup() {
        let attempts = vec![
            rec("B", 5, 1, "2022-01-03", "08:30:00", TechnicalStatus::Busy, 0.0),
            rec("B", 5, 2, "2022-01-03", "12:10:00", TechnicalStatus::OutOfNetwork, 0.0),
            rec("B", 5, 3, "2022-01-04", "20:05:00", TechnicalStatus::PickedUp, 40.0),
        ];
        let s = summarize_week("B", 5, &attempts, &SummaryConfig::default()).unwrap();
        assert_eq!(s.n_attempts, 3);
        assert!(s.picked && s.engaged);
        assert_eq!(s.status_counts, [1, 1, 0, 1, 0]);
        // PickedUp and Busy connect; OutOfNetwork does not.
        assert_eq!(s.technical_success_ratio, 2.0 / 3.0);
        assert_eq!(s.first_pickup_attempt, Some(3));
        assert_eq!(s.pickup_attempt_day, Some(2));
        assert_eq!(s.pickup_slot, Some(6));
        // 2022-01-04 is a Tuesday.
        assert_eq!(s.pickup_weekday, Some(1));
        assert_eq!(s.model_features(), [40.0, 3.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn engagement_threshold_is_strict() {
        let cfg = SummaryConfig::default();
        let at = summarize_week("B", 1, &[rec("B", 1, 1, "2022-01-03", "09:00:00", TechnicalStatus::PickedUp, 30.0)], &cfg).unwrap();
        assert!(at.picked);
        assert!(!at.engaged);
        let above = summarize_week("B", 1, &[rec("B", 1, 1, "2022-01-03", "09:00:00", TechnicalStatus::PickedUp, 30.01)], &cfg).unwrap();
        assert!(above.engaged);
    }

    #[test]
    fn all_failures() {
        let attempts = vec![
            rec("B", 1, 1, "2022-01-03", "09:00:00", TechnicalStatus::SwitchedOff, 0.0),
            rec("B", 1, 2, "2022-01-03", "11:00:00", TechnicalStatus::SwitchedOff, 0.0),
        ];
        let s = summarize_week("B", 1, &attempts, &SummaryConfig::default()).unwrap();
        assert_eq!(s.technical_success_ratio, 0.0);
        assert!(!s.picked);
        assert!(s.all_technical_failures());
    }

    #[test]
    fn empty_week_is_zero_summary() {
        let s = summarize_week("B", 4, &[], &SummaryConfig::default()).unwrap();
        assert_eq!(s, WeeklySummary::empty("B", 4));
    }

    #[test]
    fn multiple_pickups_sum_duration_and_take_first_slot() {
        let attempts = vec![
            rec("B", 1, 2, "2022-01-04", "21:00:00", TechnicalStatus::PickedUp, 20.0),
            rec("B", 1, 1, "2022-01-03", "09:00:00", TechnicalStatus::PickedUp, 15.0),
        ];
        let s = summarize_week("B", 1, &attempts, &SummaryConfig::default()).unwrap();
        assert_eq!(s.total_duration_seconds, 35.0);
        assert!(s.engaged);
        assert_eq!(s.pickup_slot, Some(0));
        assert_eq!(s.pickup_attempt_day, Some(1));
    }

    #[test]
    fn more_than_four_days_is_rejected() {
        let attempts: Vec<_> = (0..5)
            .map(|d| rec("B", 1, d + 1, &format!("2022-01-0{}", d + 3), "09:00:00", TechnicalStatus::Busy, 0.0))
            .collect();
        let err = summarize_week("B", 1, &attempts, &SummaryConfig::default());
        assert!(matches!(err, Err(Error::TooManyAttemptDays { days: 5, .. })));
    }

    #[test]
    fn gap_weeks_are_zero_filled() {
        let records = vec![
            rec("B", 2, 1, "2022-01-10", "09:00:00", TechnicalStatus::Busy, 0.0),
            rec("B", 4, 1, "2022-01-24", "09:00:00", TechnicalStatus::PickedUp, 50.0),
        ];
        let t = build_trajectories(&records, &SummaryConfig::default()).unwrap();
        let traj = &t["B"];
        let weeks: Vec<u32> = traj.weeks.iter().map(|w| w.message_index).collect();
        assert_eq!(weeks, vec![2, 3, 4]);
        assert_eq!(traj.weeks[1], WeeklySummary::empty("B", 3));
        assert_eq!(traj.enrollment_span(), 3);
    }

    #[test]
    fn single_unanswered_record() {
        let records = vec![rec("B", 7, 1, "2022-01-10", "09:00:00", TechnicalStatus::Busy, 0.0)];
        let t = build_trajectories(&records, &SummaryConfig::default()).unwrap();
        let w = &t["B"].weeks[0];
        assert!(!w.picked && !w.engaged);
        assert_eq!(w.pickup_slot, None);
    }

    #[test]
    fn duplicate_triple_is_named() {
        let records = vec![
            rec("B", 3, 2, "2022-01-10", "09:00:00", TechnicalStatus::Busy, 0.0),
            rec("B", 3, 2, "2022-01-10", "10:00:00", TechnicalStatus::Busy, 0.0),
        ];
        match build_trajectories(&records, &SummaryConfig::default()) {
            Err(Error::DuplicateAttempt {
                beneficiary_id,
                message_index,
                attempt_number,
            }) => {
                assert_eq!((beneficiary_id.as_str(), message_index, attempt_number), ("B", 3, 2));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }
}
