//! Config-driven stages behind the command-line tool.
//!
//! Every stage recomputes its inputs from the config, so each command can run
//! on its own and reruns rewrite identical bytes. Outputs go under
//! `out_dir/{data,analysis,datasets,artifacts,reports}`.
//!
//! Seeds: the global `seed` is the synthetic cohort's seed; the split seed is
//! `derive_seed(seed, "split")` and the training seed is
//! `derive_seed(seed, "train")`, from which each matrix cell takes
//! [`cell_seed`](crate::eval::cell_seed).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{self, Bucket, BucketRow, BucketThresholds, EfficacyUnit};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, MatrixConfig};
use crate::features::{self, FeatureSet, PreparedDataset, SplitSpec, Target, WindowSpec, LABEL_WINDOW_WEEKS};
use crate::ingest::{self, CallAttemptRecord, SummaryConfig, TechnicalStatus, Trajectories};
use crate::models::{ModelKind, TrainConfig};
use crate::slots::TimeSlotGrid;
use crate::synthcohort::{self, CohortConfig, Member, DEFAULT_SEED};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SynthSource {
    /// Path to a cohort config, relative to the pipeline config.
    File(PathBuf),
    Inline(Box<CohortConfig>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Csv(PathBuf),
    Synth(SynthSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowLayout {
    pub n_features_weeks: usize,
    pub n_offset_weeks: usize,
    pub stride_weeks: usize,
}

impl Default for WindowLayout {
    fn default() -> Self {
        let w = WindowSpec::default();
        Self {
            n_features_weeks: w.n_features_weeks,
            n_offset_weeks: w.n_offset_weeks,
            stride_weeks: w.stride_weeks,
        }
    }
}

impl WindowLayout {
    pub fn spec(&self, feature_set: FeatureSet) -> WindowSpec {
        WindowSpec {
            n_features_weeks: self.n_features_weeks,
            n_offset_weeks: self.n_offset_weeks,
            label_window_weeks: LABEL_WINDOW_WEEKS,
            stride_weeks: self.stride_weeks,
            feature_set,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelTrainConfigs {
    pub logreg: TrainConfig,
    pub ffnn: TrainConfig,
    pub lstm: TrainConfig,
}

impl Default for ModelTrainConfigs {
    fn default() -> Self {
        Self {
            logreg: TrainConfig::default(),
            ffnn: TrainConfig::default(),
            lstm: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub input: InputSource,
    pub engagement_threshold: f64,
    pub technical_success: Vec<TechnicalStatus>,
    pub slot_grid: TimeSlotGrid,
    pub buckets: BucketThresholds,
    pub efficacy_unit: EfficacyUnit,
    pub gap_weeks: u32,
    pub window: WindowLayout,
    pub feature_sets: Vec<FeatureSet>,
    pub train_fraction: f64,
    pub models: Vec<ModelKind>,
    pub targets: Vec<Target>,
    pub train: ModelTrainConfigs,
    pub k_percent: f64,
    pub threshold: f64,
    /// Directory that relative paths in this config are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let summary = SummaryConfig::default();
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            input: InputSource::Synth(SynthSource::Inline(Box::new(synthcohort::default_bucket_archetypes(10_000)))),
            engagement_threshold: summary.engagement_threshold,
            technical_success: summary.technical_success,
            slot_grid: summary.grid,
            buckets: BucketThresholds::default(),
            efficacy_unit: EfficacyUnit::default(),
            gap_weeks: 4,
            window: WindowLayout::default(),
            feature_sets: vec![
                FeatureSet::DURATION_ATTEMPT,
                FeatureSet::DURATION_ATTEMPT_STATUS,
                FeatureSet::ALL,
            ],
            train_fraction: SplitSpec::default().train_fraction,
            models: ModelKind::ALL.to_vec(),
            targets: Target::ALL.to_vec(),
            train: ModelTrainConfigs::default(),
            k_percent: 5.0,
            threshold: 0.5,
            base_dir: PathBuf::from("."),
        }
    }
}

/// First eight bytes (little-endian) of `sha256("{seed}|{label}")`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}|{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn summary_config(&self) -> SummaryConfig {
        SummaryConfig {
            engagement_threshold: self.engagement_threshold,
            technical_success: self.technical_success.clone(),
            grid: self.slot_grid,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: derive_seed(self.seed, "split"),
        }
    }

    pub fn matrix_config(&self) -> MatrixConfig {
        MatrixConfig {
            seed: derive_seed(self.seed, "train"),
            k_percent: self.k_percent,
            threshold: self.threshold,
            logreg: self.train.logreg.clone(),
            ffnn: self.train.ffnn.clone(),
            lstm: self.train.lstm.clone(),
        }
    }

    /// The cohort config with the global seed applied, for synthetic input.
    pub fn cohort_config(&self) -> Result<Option<CohortConfig>> {
        let mut cohort = match &self.input {
            InputSource::Csv(_) => return Ok(None),
            InputSource::Synth(SynthSource::Inline(c)) => (**c).clone(),
            InputSource::Synth(SynthSource::File(p)) => load_cohort_config(&self.resolve(p))?,
        };
        cohort.seed = self.seed;
        Ok(Some(cohort))
    }

    pub fn validate(&self) -> Result<()> {
        self.summary_config().validate()?;
        self.buckets.validate()?;
        self.split_spec().validate()?;
        self.matrix_config().validate()?;
        if self.feature_sets.is_empty() || self.models.is_empty() || self.targets.is_empty() {
            return Err(Error::Config("feature_sets, models and targets must be non-empty".into()));
        }
        for fs in &self.feature_sets {
            self.window.spec(*fs).validate()?;
        }
        if self.gap_weeks == 0 {
            return Err(Error::Config("gap_weeks must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn parse_cohort_config(json: &str) -> Result<CohortConfig> {
    let cfg: CohortConfig = serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_cohort_config(path: &Path) -> Result<CohortConfig> {
    let text = fs::read_to_string(path)?;
    parse_cohort_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Call records plus whatever ground truth the source carries.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub records: Vec<CallAttemptRecord>,
    pub members: Option<Vec<Member>>,
    pub row_errors: Vec<ingest::RowError>,
    /// sha256 of the cohort config JSON or of the input CSV bytes.
    pub source_hash: String,
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    config: &'a CohortConfig,
    config_sha256: String,
    n_beneficiaries: usize,
    n_records: usize,
    archetype_counts: BTreeMap<&'a str, usize>,
}

/// Generates a cohort and writes `calls.csv`, `members.csv` and
/// `manifest.json` into `dir`.
pub fn write_synthetic(cohort_cfg: &CohortConfig, dir: &Path) -> Result<Corpus> {
    let cohort = synthcohort::generate_cohort(cohort_cfg)?;
    let config_json = serde_json::to_string(cohort_cfg)?;
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("calls.csv"))?;
    ingest::write_call_records(&cohort.records, &mut w)?;
    w.flush()?;
    let mut m = csv::Writer::from_writer(create(&dir.join("members.csv"))?);
    m.write_record(["beneficiary_id", "archetype"])?;
    for member in &cohort.members {
        m.write_record([&member.beneficiary_id, &member.archetype])?;
    }
    m.flush()?;
    let manifest = SynthManifest {
        config: cohort_cfg,
        config_sha256: sha256_hex(config_json.as_bytes()),
        n_beneficiaries: cohort.members.len(),
        n_records: cohort.records.len(),
        archetype_counts: cohort_cfg
            .archetypes
            .iter()
            .map(|a| (a.archetype.name.as_str(), a.count))
            .collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(Corpus {
        records: cohort.records,
        members: Some(cohort.members),
        row_errors: Vec::new(),
        source_hash: sha256_hex(config_json.as_bytes()),
    })
}

/// Loads the configured input. Synthetic input is generated and written to
/// `data/`; CSV input has its rejected rows written to `data/row_errors.jsonl`.
pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let data_dir = cfg.out().join("data");
    if let Some(cohort) = cfg.cohort_config()? {
        return write_synthetic(&cohort, &data_dir);
    }
    let InputSource::Csv(path) = &cfg.input else {
        unreachable!("non-synthetic input is CSV")
    };
    let bytes = fs::read(cfg.resolve(path))?;
    let parsed = ingest::parse_call_records(bytes.as_slice())?;
    let mut w = create(&data_dir.join("row_errors.jsonl"))?;
    ingest::write_row_errors(&parsed.errors, &mut w)?;
    w.flush()?;
    if parsed.records.is_empty() {
        return Err(Error::Empty(format!(
            "no valid rows in {} ({} rejected)",
            path.display(),
            parsed.errors.len()
        )));
    }
    Ok(Corpus {
        records: parsed.records,
        members: None,
        row_errors: parsed.errors,
        source_hash: sha256_hex(&bytes),
    })
}

pub fn build_trajectories(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Trajectories> {
    let trajs = ingest::build_trajectories(&corpus.records, &cfg.summary_config())?;
    if trajs.is_empty() {
        return Err(Error::Empty("no beneficiaries".into()));
    }
    Ok(trajs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_records: usize,
    pub n_row_errors: usize,
    pub n_beneficiaries: usize,
    pub n_weeks: usize,
}

/// Writes `data/weekly.csv` and `data/ingest.json`.
pub fn write_ingest(cfg: &PipelineConfig, corpus: &Corpus, trajs: &Trajectories) -> Result<IngestSummary> {
    let data_dir = cfg.out().join("data");
    let mut w = create(&data_dir.join("weekly.csv"))?;
    ingest::write_weekly_csv(trajs, &mut w)?;
    w.flush()?;
    let summary = IngestSummary {
        n_records: corpus.records.len(),
        n_row_errors: corpus.row_errors.len(),
        n_beneficiaries: trajs.len(),
        n_weeks: trajs.values().map(|t| t.weeks.len()).sum(),
    };
    write_json(&data_dir.join("ingest.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let trajs = build_trajectories(cfg, &corpus)?;
    write_ingest(cfg, &corpus, &trajs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub count: usize,
    pub technical_success: f64,
    pub pickup_rate: f64,
    pub slot_pickup_rates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub n_beneficiaries: usize,
    pub never_reached: f64,
    pub cumulative_reach: Vec<f64>,
    pub slot_pickup_rates: Vec<Option<f64>>,
    pub buckets: BTreeMap<Bucket, BucketStats>,
    pub screened_extremes: usize,
    /// Planted archetype to assigned bucket counts, for synthetic input.
    pub archetype_buckets: Option<BTreeMap<String, BTreeMap<Bucket, usize>>>,
}

/// Cohort analytics over built trajectories; writes `analysis/`.
pub fn run_analysis(cfg: &PipelineConfig, trajs: &Trajectories, members: Option<&[Member]>) -> Result<AnalysisSummary> {
    let dir = cfg.out().join("analysis");
    fs::create_dir_all(&dir)?;
    let grid = &cfg.slot_grid;

    let curve = analytics::attempt_efficacy(trajs.values(), cfg.efficacy_unit)?;
    analytics::write_efficacy_csv(&curve, create(&dir.join("efficacy.csv"))?)?;

    let mut rows = Vec::with_capacity(trajs.len());
    let mut assigned: BTreeMap<&str, Bucket> = BTreeMap::new();
    let mut by_bucket: BTreeMap<Bucket, Vec<&ingest::Trajectory>> = BTreeMap::new();
    for t in trajs.values() {
        if t.attempted_weeks().next().is_none() {
            continue;
        }
        let rates = analytics::bucket_rates(t, cfg.buckets.engagement_base)?;
        let bucket = analytics::bucket_for_rates(&rates, &cfg.buckets);
        rows.push(BucketRow {
            beneficiary_id: &t.beneficiary_id,
            bucket,
            rates,
        });
        assigned.insert(&t.beneficiary_id, bucket);
        by_bucket.entry(bucket).or_default().push(t);
    }
    analytics::write_buckets_csv(&rows, create(&dir.join("buckets.csv"))?)?;

    let mut buckets = BTreeMap::new();
    for (bucket, ts) in &by_bucket {
        let profile = analytics::bucket_profile(ts.iter().copied(), grid, cfg.engagement_threshold)?;
        analytics::write_profile_csv(&profile, create(&dir.join(format!("bucket_profile_{bucket}.csv")))?)?;
        let slots = analytics::slot_pickup_rates(ts.iter().copied(), grid)?;
        analytics::write_slots_csv(&slots, create(&dir.join(format!("slots_{bucket}.csv")))?)?;
        buckets.insert(
            *bucket,
            BucketStats {
                count: ts.len(),
                technical_success: profile.pooled_technical_success(),
                pickup_rate: profile.pooled_pickup_rate(),
                slot_pickup_rates: slots.rates(),
            },
        );
    }

    let slots = analytics::slot_pickup_rates(trajs.values(), grid)?;
    analytics::write_slots_csv(&slots, create(&dir.join("slots.csv"))?)?;

    let gaps: Vec<_> = trajs
        .values()
        .flat_map(|t| analytics::dropout_gap_scan(t, cfg.gap_weeks))
        .collect();
    analytics::write_gaps_csv(&gaps, create(&dir.join("gaps.csv"))?)?;

    let archetype_buckets = members.map(|ms| {
        let mut table: BTreeMap<String, BTreeMap<Bucket, usize>> = BTreeMap::new();
        for m in ms {
            if let Some(b) = assigned.get(m.beneficiary_id.as_str()) {
                *table.entry(m.archetype.clone()).or_default().entry(*b).or_default() += 1;
            }
        }
        table
    });

    let summary = AnalysisSummary {
        n_beneficiaries: trajs.len(),
        never_reached: curve.never_reached,
        cumulative_reach: curve.cumulative_reach.clone(),
        slot_pickup_rates: slots.rates(),
        buckets,
        screened_extremes: analytics::screen_extremes(trajs.values(), &cfg.buckets).len(),
        archetype_buckets,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_analyze(cfg: &PipelineConfig) -> Result<AnalysisSummary> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let trajs = build_trajectories(cfg, &corpus)?;
    run_analysis(cfg, &trajs, corpus.members.as_deref())
}

#[derive(Serialize)]
struct SplitRecord<'a> {
    seed: u64,
    train_fraction: f64,
    train: &'a [String],
    test: &'a [String],
}

/// Splits beneficiaries and windows every configured feature set; writes
/// `datasets/`.
pub fn run_featurize(cfg: &PipelineConfig, trajs: &Trajectories) -> Result<Vec<PreparedDataset>> {
    let dir = cfg.out().join("datasets");
    let ids: Vec<String> = trajs.keys().cloned().collect();
    let split = cfg.split_spec();
    let (train_ids, test_ids) = features::split_beneficiaries(&ids, &split)?;
    write_json(
        &dir.join("split.json"),
        &SplitRecord {
            seed: split.seed,
            train_fraction: split.train_fraction,
            train: &train_ids,
            test: &test_ids,
        },
    )?;
    let mut out = Vec::with_capacity(cfg.feature_sets.len());
    for fs in &cfg.feature_sets {
        let spec = cfg.window.spec(*fs);
        let d = features::prepare_dataset(trajs, &train_ids, &test_ids, &spec, cfg.slot_grid.n_slots())?;
        let sub = dir.join(fs.to_string());
        let cols = d.n_columns();
        let mut w = create(&sub.join("train.csv"))?;
        features::write_windows_csv(&d.train, cols, &mut w)?;
        w.flush()?;
        let mut w = create(&sub.join("test.csv"))?;
        features::write_windows_csv(&d.test, cols, &mut w)?;
        w.flush()?;
        write_json(&sub.join("stats.json"), &d.stats)?;
        write_json(&sub.join("spec.json"), &d.spec)?;
        out.push(d);
    }
    Ok(out)
}

pub fn cmd_featurize(cfg: &PipelineConfig) -> Result<Vec<PreparedDataset>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let trajs = build_trajectories(cfg, &corpus)?;
    run_featurize(cfg, &trajs)
}

#[derive(Serialize)]
struct Provenance<'a> {
    config: &'a PipelineConfig,
    window: WindowLayout,
    global_seed: u64,
    split_seed: u64,
    train_seed: u64,
    source_sha256: &'a str,
}

fn artifact_stem(kind: ModelKind, fs: FeatureSet) -> String {
    format!("{}__{fs}", kind.id())
}

/// Trains and evaluates the model matrix; writes `artifacts/` and `reports/`.
/// A run with failed cells still writes its partial report, then errors.
pub fn run_train_eval(
    cfg: &PipelineConfig,
    datasets: &[PreparedDataset],
    targets: &[Target],
    source_hash: &str,
) -> Result<EvalReport> {
    let matrix = cfg.matrix_config();
    let outcome = eval::run_matrix(datasets, &cfg.models, targets, &matrix)?;
    let out = cfg.out();
    for cell in &outcome.cells {
        let target_dir = out.join("artifacts").join(cell.row.target.name());
        let stem = artifact_stem(cell.row.model, cell.row.feature_set);
        cell.artifact.save(&target_dir, &stem)?;
        let d = datasets
            .iter()
            .find(|d| d.spec.feature_set == cell.row.feature_set)
            .expect("cell dataset");
        let labels = cell.row.target.labels(&d.test);
        let roc = eval::roc_points(&labels, &cell.test_scores)?;
        let mut w = csv::Writer::from_writer(create(
            &out.join("reports").join("roc").join(cell.row.target.name()).join(format!("{stem}.csv")),
        )?);
        w.write_record(["false_positive_rate", "true_positive_rate"])?;
        for (fpr, tpr) in roc {
            w.write_record([format!("{fpr:?}"), format!("{tpr:?}")])?;
        }
        w.flush()?;
    }
    let mut report = outcome.report;
    report.provenance = serde_json::to_value(Provenance {
        config: cfg,
        window: cfg.window,
        global_seed: cfg.seed,
        split_seed: cfg.split_spec().seed,
        train_seed: matrix.seed,
        source_sha256: source_hash,
    })?;
    let reports = out.join("reports");
    let mut w = create(&reports.join("report.csv"))?;
    eval::write_report_csv(&report, &mut w)?;
    w.flush()?;
    let mut w = create(&reports.join("report.json"))?;
    eval::write_report_json(&report, &mut w)?;
    w.flush()?;
    if report.is_partial() {
        let first = &report.failures[0];
        return Err(Error::Incomplete(format!(
            "{} of {} cells failed; first: {} {} {}: {}",
            report.failures.len(),
            report.failures.len() + report.rows.len(),
            first.model.id(),
            first.feature_set,
            first.target,
            first.error
        )));
    }
    Ok(report)
}

pub fn cmd_train_eval(cfg: &PipelineConfig, targets: &[Target]) -> Result<EvalReport> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let trajs = build_trajectories(cfg, &corpus)?;
    let datasets = run_featurize(cfg, &trajs)?;
    run_train_eval(cfg, &datasets, targets, &corpus.source_hash)
}

/// Renders `reports/report.json` as one text table per target and writes it
/// to `reports/tables.txt`.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<String> {
    let reports = cfg.out().join("reports");
    let text = fs::read_to_string(reports.join("report.json"))?;
    let report: EvalReport = serde_json::from_str(&text)?;
    let rendered = render_report(&report);
    fs::write(reports.join("tables.txt"), &rendered)?;
    Ok(rendered)
}

pub fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let targets: Vec<Target> = Target::ALL
        .into_iter()
        .filter(|t| report.rows_for(*t).next().is_some())
        .collect();
    for target in targets {
        s.push_str(&format!("{target}\n"));
        s.push_str(&format!(
            "{:<20} {:<34} {:>17} {:>14} {:>9}\n",
            "Model",
            "Features",
            "Balanced Accuracy",
            format!("Precision@{}", report.k_percent),
            "AUC"
        ));
        for r in report.rows_for(target) {
            s.push_str(&format!(
                "{:<20} {:<34} {:>17.6} {:>14.6} {:>9.6}\n",
                r.model.display_name(),
                r.feature_set.to_string(),
                r.balanced_accuracy,
                r.precision_at_k,
                r.auc
            ));
        }
        s.push('\n');
    }
    if report.is_partial() {
        s.push_str(&format!("PARTIAL: {} cells failed\n", report.failures.len()));
    }
    s
}

#[derive(Debug)]
pub struct RunSummary {
    pub ingest: IngestSummary,
    pub analysis: AnalysisSummary,
    pub report: EvalReport,
}

/// Every stage in order: data, ingest, analyze, featurize, train-eval, report.
pub fn cmd_run(cfg: &PipelineConfig, targets: &[Target]) -> Result<RunSummary> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let trajs = build_trajectories(cfg, &corpus)?;
    let ingest = write_ingest(cfg, &corpus, &trajs)?;
    let analysis = run_analysis(cfg, &trajs, corpus.members.as_deref())?;
    let datasets = run_featurize(cfg, &trajs)?;
    let report = run_train_eval(cfg, &datasets, targets, &corpus.source_hash)?;
    cmd_report(cfg)?;
    Ok(RunSummary {
        ingest,
        analysis,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        assert_ne!(derive_seed(1, "split"), derive_seed(1, "train"));
        assert_eq!(derive_seed(1, "split"), derive_seed(1, "split"));
    }

    #[test]
    fn csv_input_parses() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"input": {"csv": "calls.csv"}}"#).unwrap();
        assert_eq!(cfg.input, InputSource::Csv(PathBuf::from("calls.csv")));
        let cfg: PipelineConfig = serde_json::from_str(r#"{"input": {"synth": "cohort.json"}}"#).unwrap();
        assert_eq!(cfg.input, InputSource::Synth(SynthSource::File(PathBuf::from("cohort.json"))));
    }
}
