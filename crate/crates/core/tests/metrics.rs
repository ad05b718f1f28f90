mod common;

use common::{confusion_balanced_accuracy, pairwise_auc, sort_and_count_precision};
use listenership::eval::{auc, balanced_accuracy, precision_at_k, roc_points, top_k_count};
use listenership::models::score_random;
use listenership::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores drawn from a coarse grid so that ties are common.
fn instance(seed: u64, n: usize) -> (Vec<bool>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = (0..n).map(|_| f64::from(rng.gen_range(0..40u32)) / 40.0).collect();
    (labels, scores)
}

#[test]
fn auc_matches_pairwise_concordance() {
    for seed in 0..50 {
        let (labels, scores) = instance(seed, 200);
        let got = auc(&labels, &scores).unwrap();
        assert!((got - pairwise_auc(&labels, &scores)).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn balanced_accuracy_matches_confusion_counts() {
    for seed in 0..50 {
        let (labels, scores) = instance(seed, 200);
        for threshold in [0.0, 0.25, 0.5, 0.7, 1.0] {
            assert_eq!(
                balanced_accuracy(&labels, &scores, threshold).unwrap(),
                confusion_balanced_accuracy(&labels, &scores, threshold)
            );
        }
    }
}

#[test]
fn precision_at_k_matches_sort_and_count() {
    for seed in 0..50 {
        let (labels, scores) = instance(seed, 200);
        for k in [0.1, 1.0, 5.0, 12.5, 50.0, 100.0] {
            assert_eq!(
                precision_at_k(&labels, &scores, k).unwrap(),
                sort_and_count_precision(&labels, &scores, k),
                "seed {seed} k {k}"
            );
        }
    }
}

#[test]
fn metric_edge_cases() {
    assert_eq!(top_k_count(10_000, 5.0).unwrap(), 500);
    assert_eq!(top_k_count(101, 5.0).unwrap(), 6);
    assert_eq!(top_k_count(3, 5.0).unwrap(), 1);
    assert!(matches!(top_k_count(10, 0.0), Err(Error::Config(_))));
    assert!(matches!(top_k_count(10, 101.0), Err(Error::Config(_))));
    assert!(matches!(auc(&[true, true], &[0.1, 0.2]), Err(Error::UndefinedMetric(_))));
    assert!(matches!(balanced_accuracy(&[false], &[0.1], 0.5), Err(Error::UndefinedMetric(_))));
    assert!(auc(&[true, false], &[f64::NAN, 0.2]).is_err());
    assert!(auc(&[true, false], &[0.1]).is_err());
    assert_eq!(auc(&[true, false, true, false], &[0.5; 4]).unwrap(), 0.5);
    assert_eq!(auc(&[true, false], &[0.9, 0.1]).unwrap(), 1.0);
    assert_eq!(auc(&[true, false], &[0.1, 0.9]).unwrap(), 0.0);
}

#[test]
fn roc_points_span_the_unit_square() {
    let (labels, scores) = instance(3, 200);
    let pts = roc_points(&labels, &scores).unwrap();
    assert_eq!(pts.first(), Some(&(0.0, 0.0)));
    assert_eq!(pts.last(), Some(&(1.0, 1.0)));
    assert!(pts.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    // trapezoids under the curve reproduce the rank AUC
    let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    assert!((area - auc(&labels, &scores).unwrap()).abs() < 1e-9);
}

#[test]
fn random_scores_are_uninformative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let labels: Vec<bool> = (0..20_000).map(|_| rng.gen_bool(0.06)).collect();
    let prevalence = labels.iter().filter(|l| **l).count() as f64 / labels.len() as f64;
    let scores = score_random(labels.len(), 99).unwrap();
    assert!((auc(&labels, &scores).unwrap() - 0.5).abs() <= 0.02);
    assert!((balanced_accuracy(&labels, &scores, 0.5).unwrap() - 0.5).abs() <= 0.02);
    assert!((precision_at_k(&labels, &scores, 5.0).unwrap() - prevalence).abs() <= 0.03);
}

fn labelled_scores() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n).prop_map(|mut l| {
                l[0] = true;
                l[1] = false;
                l
            }),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

proptest! {
    #[test]
    fn auc_is_invariant_to_increasing_transforms((labels, scores) in labelled_scores(), a in 0.1f64..10.0, b in -3.0f64..3.0) {
        let base = auc(&labels, &scores).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert!((auc(&labels, &affine).unwrap() - base).abs() < 1e-12);
        prop_assert!((auc(&labels, &cubed).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&labels, &flipped).unwrap() - (1.0 - base)).abs() < 1e-9);
    }

    #[test]
    fn auc_is_invariant_to_duplicating_the_data((labels, scores) in labelled_scores()) {
        let l2: Vec<bool> = labels.iter().chain(&labels).copied().collect();
        let s2: Vec<f64> = scores.iter().chain(&scores).copied().collect();
        prop_assert!((auc(&l2, &s2).unwrap() - auc(&labels, &scores).unwrap()).abs() < 1e-12);
        prop_assert!((auc(&labels, &scores).unwrap() - pairwise_auc(&labels, &scores)).abs() < 1e-9);
    }

    #[test]
    fn top_k_hits_never_decrease_with_k((labels, scores) in labelled_scores()) {
        let mut last_hits = 0.0;
        for k in [1.0, 5.0, 10.0, 25.0, 50.0, 100.0] {
            let m = top_k_count(labels.len(), k).unwrap() as f64;
            let hits = precision_at_k(&labels, &scores, k).unwrap() * m;
            prop_assert!(hits + 1e-9 >= last_hits);
            last_hits = hits;
        }
        let prevalence = labels.iter().filter(|l| **l).count() as f64 / labels.len() as f64;
        prop_assert!((precision_at_k(&labels, &scores, 100.0).unwrap() - prevalence).abs() < 1e-12);
    }

    #[test]
    fn balanced_accuracy_is_bounded((labels, scores) in labelled_scores(), t in -6.0f64..6.0) {
        let ba = balanced_accuracy(&labels, &scores, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&ba));
        prop_assert_eq!(ba, confusion_balanced_accuracy(&labels, &scores, t));
    }
}
