mod common;

use common::{attempt, summary_config};
use listenership::analytics::{attempt_efficacy, bucket_rates, EfficacyUnit, EngagementBase};
use listenership::ingest::{build_trajectories, parse_call_records, write_call_records, TechnicalStatus};
use listenership::synthcohort::{default_bucket_archetypes, generate_cohort};
use listenership::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_csv_reingests_without_row_errors() {
    let cohort = generate_cohort(&default_bucket_archetypes(300)).unwrap();
    let mut buf = Vec::new();
    write_call_records(&cohort.records, &mut buf).unwrap();
    let parsed = parse_call_records(buf.as_slice()).unwrap();
    assert!(parsed.errors.is_empty(), "{:?}", &parsed.errors[..parsed.errors.len().min(3)]);
    assert_eq!(parsed.records, cohort.records);
}

#[test]
fn generation_is_seeded() {
    let cfg = default_bucket_archetypes(200);
    assert_eq!(generate_cohort(&cfg).unwrap(), generate_cohort(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(generate_cohort(&cfg).unwrap().records, generate_cohort(&other).unwrap().records);
}

#[test]
fn trajectories_ignore_record_order() {
    let cohort = generate_cohort(&default_bucket_archetypes(150)).unwrap();
    let cfg = summary_config();
    let base = build_trajectories(&cohort.records, &cfg).unwrap();
    let mut shuffled = cohort.records.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(build_trajectories(&shuffled, &cfg).unwrap(), base);
    assert_eq!(base.len(), 150);
    for t in base.values() {
        let idx: Vec<u32> = t.weeks.iter().map(|w| w.message_index).collect();
        let first = idx[0];
        assert!(idx.iter().enumerate().all(|(i, m)| *m == first + i as u32));
    }
}

#[test]
fn higher_answer_probability_raises_observed_pickup() {
    let mut last = -1.0;
    for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mut cfg = default_bucket_archetypes(400);
        for a in &mut cfg.archetypes {
            a.archetype.pickup_prob_per_attempt = p;
            a.archetype.technical_failure_prob = 0.2;
        }
        let cohort = generate_cohort(&cfg).unwrap();
        let trajs = build_trajectories(&cohort.records, &summary_config()).unwrap();
        let rates: Vec<f64> = trajs
            .values()
            .map(|t| bucket_rates(t, EngagementBase::PickedWeeks).unwrap().pickup_rate)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!(mean > last, "p={p}: {mean} <= {last}");
        last = mean;
    }
}

#[test]
fn efficacy_curve_is_cumulative() {
    let cohort = generate_cohort(&default_bucket_archetypes(500)).unwrap();
    let trajs = build_trajectories(&cohort.records, &summary_config()).unwrap();
    for unit in [EfficacyUnit::BeneficiaryWeek, EfficacyUnit::BeneficiaryFirstWeek] {
        let curve = attempt_efficacy(trajs.values(), unit).unwrap();
        assert!(curve.cumulative_reach.windows(2).all(|w| w[1] >= w[0]));
        let reached = curve.cumulative_reach.last().unwrap();
        assert!((reached + curve.never_reached - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bad_rows_are_reported_and_skipped() {
    let mut buf = Vec::new();
    let records = vec![
        attempt("a", 1, 1, TechnicalStatus::Busy, 0.0),
        attempt("a", 1, 2, TechnicalStatus::PickedUp, 40.0),
    ];
    write_call_records(&records, &mut buf).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    text.push_str("a,2,1,2021-01-11,09:00:00,BUSY,12.0\n");
    text.push_str("a,99,1,2021-01-11,09:00:00,BUSY,0.0\n");
    text.push_str("a,2,1,2021-13-11,09:00:00,BUSY,0.0\n");
    text.push_str("a,2,1,2021-01-11,09:00:00,LOST,0.0\n");
    text.push_str("a,2,1\n");
    let parsed = parse_call_records(text.as_bytes()).unwrap();
    assert_eq!(parsed.records, records);
    let lines: Vec<u64> = parsed.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![4, 5, 6, 7, 8]);
    assert!(matches!(
        parse_call_records("id,week\n".as_bytes()),
        Err(Error::Header(_))
    ));
}

#[test]
fn empty_cohort_config_is_rejected() {
    let mut cfg = default_bucket_archetypes(10);
    for a in &mut cfg.archetypes {
        a.count = 0;
    }
    assert!(matches!(generate_cohort(&cfg), Err(Error::Config(_))));
}
