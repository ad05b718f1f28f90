use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use listenership::features::Target;
use listenership::pipeline::{self, PipelineConfig};
use listenership::{Error, Result};

/// Listenership trajectories, cohort analytics and low-listenership models
/// for IVR call-detail records.
#[derive(Parser, Debug)]
#[command(name = "listenership", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic call-record corpus into OUT/data.
    Synth(Common),
    /// Parse call records and build weekly trajectories into OUT/data.
    Ingest(Common),
    /// Cohort analytics into OUT/analysis.
    Analyze(Common),
    /// Rolling-window datasets into OUT/datasets.
    Featurize(Common),
    /// Train and evaluate the model matrix into OUT/artifacts and OUT/reports.
    TrainEval(Common),
    /// Render OUT/reports/report.json as tables.
    Report(Common),
    /// Every stage in order.
    Run(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config. `synth` also accepts a bare cohort config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Global seed (overrides the config's seed).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Which label(s) to model (overrides the config's targets).
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    #[value(name = "low_pickup", alias = "low-pickup")]
    LowPickup,
    #[value(name = "low_engagement", alias = "low-engagement")]
    LowEngagement,
    Both,
}

impl TargetArg {
    fn targets(self) -> Vec<Target> {
        match self {
            TargetArg::LowPickup => vec![Target::LowPickup],
            TargetArg::LowEngagement => vec![Target::LowEngagement],
            TargetArg::Both => Target::ALL.to_vec(),
        }
    }
}

fn is_cohort_config(path: &Path) -> Result<bool> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(value.get("archetypes").is_some())
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.out_dir = std::env::current_dir()?.join(out);
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(t) = c.target {
        cfg.targets = t.targets();
    }
    Ok(cfg)
}

fn synth(c: &Common) -> Result<()> {
    let (cohort, out) = match &c.config {
        Some(p) if is_cohort_config(p)? => {
            let mut cohort = pipeline::load_cohort_config(p)?;
            if let Some(seed) = c.seed {
                cohort.seed = seed;
            }
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            (cohort, out)
        }
        _ => {
            let cfg = load_config(c)?;
            let cohort = cfg
                .cohort_config()?
                .ok_or_else(|| Error::Config("synth needs a synthetic input section".into()))?;
            (cohort, cfg.out())
        }
    };
    let corpus = pipeline::write_synthetic(&cohort, &out.join("data"))?;
    eprintln!(
        "wrote {} records for {} beneficiaries to {}",
        corpus.records.len(),
        corpus.members.as_ref().map_or(0, Vec::len),
        out.join("data").display()
    );
    Ok(())
}

fn run(command: Command) -> Result<()> {
    let common = match &command {
        Command::Synth(c)
        | Command::Ingest(c)
        | Command::Analyze(c)
        | Command::Featurize(c)
        | Command::TrainEval(c)
        | Command::Report(c)
        | Command::Run(c) => c,
    };
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &command {
        Command::Synth(c) => synth(c),
        Command::Ingest(c) => {
            let s = pipeline::cmd_ingest(&load_config(c)?)?;
            eprintln!(
                "{} records ({} rejected), {} beneficiaries",
                s.n_records, s.n_row_errors, s.n_beneficiaries
            );
            Ok(())
        }
        Command::Analyze(c) => {
            let s = pipeline::cmd_analyze(&load_config(c)?)?;
            eprintln!("never reached {:.4}", s.never_reached);
            Ok(())
        }
        Command::Featurize(c) => {
            for d in pipeline::cmd_featurize(&load_config(c)?)? {
                eprintln!("{}: {} train / {} test windows", d.spec.feature_set, d.train.len(), d.test.len());
            }
            Ok(())
        }
        Command::TrainEval(c) => {
            let cfg = load_config(c)?;
            let report = pipeline::cmd_train_eval(&cfg, &cfg.targets)?;
            print!("{}", pipeline::render_report(&report));
            Ok(())
        }
        Command::Report(c) => {
            print!("{}", pipeline::cmd_report(&load_config(c)?)?);
            Ok(())
        }
        Command::Run(c) => {
            let cfg = load_config(c)?;
            let s = pipeline::cmd_run(&cfg, &cfg.targets)?;
            print!("{}", pipeline::render_report(&s.report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
