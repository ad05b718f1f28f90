//! Prints the calibration statistics of the default synthetic cohort.
//!
//! cargo run --release --example cohort_stats -- [n_beneficiaries] [seed]

use std::collections::BTreeMap;

use listenership::analytics::{self, Bucket, BucketThresholds, EfficacyUnit};
use listenership::features::{windows_for, WindowSpec};
use listenership::ingest::{build_trajectories, SummaryConfig};
use listenership::synthcohort::{default_bucket_archetypes, generate_cohort};

fn main() -> listenership::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(10_000, |s| s.parse().expect("count"));
    let mut cfg = default_bucket_archetypes(n);
    if let Some(seed) = args.get(2) {
        cfg.seed = seed.parse().expect("seed");
    }
    let t0 = std::time::Instant::now();
    let cohort = generate_cohort(&cfg)?;
    eprintln!("gen {:?}", t0.elapsed());
    let summary = SummaryConfig::default();
    let trajs = build_trajectories(&cohort.records, &summary)?;
    eprintln!("traj {:?}", t0.elapsed());
    println!("records {} beneficiaries {}", cohort.records.len(), trajs.len());

    let curve = analytics::attempt_efficacy(trajs.values(), EfficacyUnit::BeneficiaryWeek)?;
    println!("per-attempt {:.3?}", curve.per_attempt_reach);
    println!("never reached {:.4}", curve.never_reached);

    let th = BucketThresholds::default();
    let mut confusion: BTreeMap<(String, Bucket), usize> = BTreeMap::new();
    let mut by_bucket: BTreeMap<Bucket, Vec<&listenership::ingest::Trajectory>> = BTreeMap::new();
    for m in &cohort.members {
        let t = &trajs[&m.beneficiary_id];
        let b = analytics::bucket_assign(t, &th)?;
        *confusion.entry((m.archetype.clone(), b)).or_default() += 1;
        by_bucket.entry(b).or_default().push(t);
    }
    for ((arch, b), c) in &confusion {
        println!("archetype {arch} -> {b}: {c}");
    }
    for (b, ts) in &by_bucket {
        let p = analytics::bucket_profile(ts.iter().copied(), &summary.grid, 30.0)?;
        let slots = analytics::slot_pickup_rates(ts.iter().copied(), &summary.grid)?;
        println!(
            "{b}: n={} tech_success={:.3} pickup={:.3} slots={:.3?}",
            ts.len(),
            p.pooled_technical_success(),
            p.pooled_pickup_rate(),
            slots.rates().iter().map(|r| r.unwrap_or(f64::NAN)).collect::<Vec<_>>()
        );
    }
    let slots = analytics::slot_pickup_rates(trajs.values(), &summary.grid)?;
    println!(
        "cohort slots {:.3?}",
        slots.rates().iter().map(|r| r.unwrap_or(f64::NAN)).collect::<Vec<_>>()
    );
    let screened = analytics::screen_extremes(trajs.values(), &th).len();
    println!("screened extremes {screened}");

    let windows = windows_for(trajs.values(), &WindowSpec::default(), 7);
    let n_w = windows.len() as f64;
    let lp = windows.iter().filter(|w| w.label_low_pickup).count() as f64;
    let le = windows.iter().filter(|w| w.label_low_engagement).count() as f64;
    println!("windows {} low_pickup {:.3} low_engagement {:.3}", windows.len(), lp / n_w, le / n_w);
    Ok(())
}
