use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use listenership::features::{FeatureSet, Target};
use listenership::models::{fit_logreg, TrainConfig, TrainingSet};
use listenership_ffi::*;
use ndarray::Array2;

fn last_error() -> String {
    let p = ls_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn metrics_match_core() {
    let labels = [1u8, 1, 0, 0];
    let scores = [1.0, 0.0, 0.0, 0.0];
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(ls_balanced_accuracy(labels.as_ptr(), scores.as_ptr(), 4, 0.5, &mut out), LsStatus::LS_OK);
        assert_eq!(out, 0.75);
        assert_eq!(ls_auc(labels.as_ptr(), [0.3, 0.3, 0.3, 0.3].as_ptr(), 4, &mut out), LsStatus::LS_OK);
        assert_eq!(out, 0.5);
        assert_eq!(ls_precision_at_k(labels.as_ptr(), scores.as_ptr(), 4, 25.0, &mut out), LsStatus::LS_OK);
        assert_eq!(out, 1.0);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut out = 0.0;
    unsafe {
        let st = ls_auc([1u8, 1].as_ptr(), [0.1, 0.2].as_ptr(), 2, &mut out);
        assert_eq!(st, LsStatus::LS_ERR_UNDEFINED_METRIC);
        assert!(last_error().contains("single class"));

        assert_eq!(ls_auc(ptr::null(), [0.1].as_ptr(), 1, &mut out), LsStatus::LS_ERR_NULL_POINTER);
        assert!(last_error().contains("labels"));

        let st = ls_precision_at_k([1u8, 0].as_ptr(), [0.1, 0.2].as_ptr(), 2, 0.0, &mut out);
        assert_eq!(st, LsStatus::LS_ERR_CONFIG);

        assert_eq!(ls_auc([1u8, 0].as_ptr(), [0.9, 0.1].as_ptr(), 2, &mut out), LsStatus::LS_OK);
        assert!(ls_last_error().is_null());
    }
}

#[test]
fn cohort_handle_lifecycle() {
    let mut cohort = ptr::null_mut();
    unsafe {
        assert_eq!(ls_cohort_generate_default(200, 5, &mut cohort), LsStatus::LS_OK);
        assert!(!cohort.is_null());
        assert_eq!(ls_cohort_beneficiary_count(cohort), 200);
        assert!(ls_cohort_record_count(cohort) > 200);
        let mut never = f64::NAN;
        assert_eq!(ls_cohort_never_reached(cohort, &mut never), LsStatus::LS_OK);
        assert!((0.0..1.0).contains(&never));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("calls.csv").to_str().unwrap()).unwrap();
        assert_eq!(ls_cohort_write_csv(cohort, path.as_ptr()), LsStatus::LS_OK);
        let parsed = listenership::ingest::parse_call_records(std::fs::File::open(dir.path().join("calls.csv")).unwrap()).unwrap();
        assert_eq!(parsed.records.len(), ls_cohort_record_count(cohort));
        assert!(parsed.errors.is_empty());
        ls_cohort_free(cohort);
        ls_cohort_free(ptr::null_mut());
        assert_eq!(ls_cohort_record_count(ptr::null()), 0);
    }
}

#[test]
fn cohort_from_json_config() {
    let cfg = listenership::synthcohort::default_bucket_archetypes(40);
    let json = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut cohort = ptr::null_mut();
    unsafe {
        assert_eq!(ls_cohort_generate(json.as_ptr(), &mut cohort), LsStatus::LS_OK);
        assert_eq!(ls_cohort_beneficiary_count(cohort), 40);
        ls_cohort_free(cohort);

        let bad = CString::new("{\"seed\": 1}").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(ls_cohort_generate(bad.as_ptr(), &mut other), LsStatus::LS_ERR_CONFIG);
        assert!(other.is_null());
    }
}

fn trained_model(dir: &Path) -> (PathBuf, Array2<f64>, Vec<f64>) {
    let x = Array2::from_shape_fn((64, 2), |(i, j)| ((i * 5 + j * 11) % 17) as f64 / 8.0 - 1.0);
    let y: Vec<bool> = (0..64).map(|i| x[[i, 0]] + x[[i, 1]] > 0.0).collect();
    let set = TrainingSet {
        x: x.view(),
        y: &y,
        feature_set: FeatureSet::DURATION_ATTEMPT,
        n_weeks: 1,
        target: Target::LowPickup,
        stats: None,
    };
    let config = TrainConfig {
        epochs: 20,
        batch_size: 16,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let artifact = fit_logreg(&set, &config).unwrap();
    let expected = listenership::models::score(&artifact, x.view()).unwrap();
    (artifact.save(dir, "logreg").unwrap(), x, expected)
}

#[test]
fn model_scores_match_core_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, x, expected) = trained_model(dir.path());
    let path = CString::new(manifest.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(ls_model_load(path.as_ptr(), &mut model), LsStatus::LS_OK);
        assert_eq!(ls_model_input_dim(model), 2);
        let flat: Vec<f64> = x.iter().copied().collect();
        let mut out = vec![0.0; 64];
        assert_eq!(ls_model_score(model, flat.as_ptr(), 64, 2, out.as_mut_ptr()), LsStatus::LS_OK);
        assert_eq!(out, expected);
        assert_eq!(
            ls_model_score(model, flat.as_ptr(), 32, 4, out.as_mut_ptr()),
            LsStatus::LS_ERR_SHAPE
        );
        ls_model_free(model);

        let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
        let mut m2 = ptr::null_mut();
        assert_eq!(ls_model_load(missing.as_ptr(), &mut m2), LsStatus::LS_ERR_IO);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(ls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("listenership.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "ls_last_error",
        "ls_auc",
        "ls_balanced_accuracy",
        "ls_precision_at_k",
        "ls_cohort_generate",
        "ls_cohort_free",
        "ls_model_load",
        "ls_model_score",
        "ls_model_score_raw",
        "ls_model_free",
        "typedef struct LsCohort LsCohort",
        "typedef struct LsModel LsModel",
        "LS_ERR_SHAPE = 5",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"listenership.h\"\n\
         int main(void) {\n\
           unsigned char l[2] = {1, 0}; double s[2] = {0.9, 0.1}; double out = 0;\n\
           LsCohort *c = NULL; LsModel *m = NULL;\n\
           ls_cohort_free(c); ls_model_free(m);\n\
           return ls_auc(l, s, 2, &out) == LS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .expect("C compiler available");
    assert!(status.success());
}
