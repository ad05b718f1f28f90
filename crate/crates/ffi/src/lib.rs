//! C ABI over the listenership library.
//!
//! Every fallible call returns an [`LsStatus`]; on failure the message is
//! available from [`ls_last_error`] on the same thread until the next call.
//! Objects are opaque handles created by `*_load`/`*_generate` calls
//! and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use listenership::analytics::{self, EfficacyUnit};
use listenership::eval;
use listenership::ingest::{self, SummaryConfig, Trajectories};
use listenership::models::{self, ModelArtifact};
use listenership::synthcohort::{self, CohortConfig, SyntheticCohort};
use listenership::Error;
use ndarray::ArrayView2;

#[allow(non_camel_case_types)]
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsStatus {
    LS_OK = 0,
    LS_ERR_NULL_POINTER = 1,
    LS_ERR_CONFIG = 2,
    LS_ERR_IO = 3,
    LS_ERR_DATA = 4,
    LS_ERR_SHAPE = 5,
    LS_ERR_UNDEFINED_METRIC = 6,
    LS_ERR_INTERNAL = 7,
}

/// A generated synthetic cohort and its weekly trajectories.
pub struct LsCohort {
    cohort: SyntheticCohort,
    trajectories: Trajectories,
}

/// A trained classifier loaded from disk.
pub struct LsModel {
    artifact: ModelArtifact,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Config(_) => LsStatus::LS_ERR_CONFIG,
        Error::Io(_) => LsStatus::LS_ERR_IO,
        Error::Shape(_) => LsStatus::LS_ERR_SHAPE,
        Error::UndefinedMetric(_) => LsStatus::LS_ERR_UNDEFINED_METRIC,
        Error::Incomplete(_) => LsStatus::LS_ERR_INTERNAL,
        _ => LsStatus::LS_ERR_DATA,
    }
}

/// Runs `f`, converting errors and panics into a status and a last-error message.
fn guard(f: impl FnOnce() -> Result<(), (LsStatus, String)>) -> LsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::LS_OK,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::LS_ERR_INTERNAL
        }
    }
}

fn lib<T>(r: listenership::Result<T>) -> Result<T, (LsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LsStatus, String) {
    (LsStatus::LS_ERR_NULL_POINTER, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LsStatus::LS_ERR_DATA, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (LsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn labels_of(labels: &[u8]) -> Vec<bool> {
    labels.iter().map(|&l| l != 0).collect()
}

/// ROC AUC of `scores` against 0/1 `labels`, ties counted as one half.
///
/// # Safety
/// `labels` and `scores` must point to `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        let l = labels_of(slice_arg(labels, n, "labels")?);
        let s = slice_arg(scores, n, "scores")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(eval::auc(&l, s))?;
        Ok(())
    })
}

/// Balanced accuracy predicting positive at `score >= threshold`.
///
/// # Safety
/// As [`ls_auc`].
#[no_mangle]
pub unsafe extern "C" fn ls_balanced_accuracy(
    labels: *const u8,
    scores: *const f64,
    n: usize,
    threshold: f64,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        let l = labels_of(slice_arg(labels, n, "labels")?);
        let s = slice_arg(scores, n, "scores")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(eval::balanced_accuracy(&l, s, threshold))?;
        Ok(())
    })
}

/// Precision among the top `ceil(n * k_percent / 100)` scores.
///
/// # Safety
/// As [`ls_auc`].
#[no_mangle]
pub unsafe extern "C" fn ls_precision_at_k(
    labels: *const u8,
    scores: *const f64,
    n: usize,
    k_percent: f64,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        let l = labels_of(slice_arg(labels, n, "labels")?);
        let s = slice_arg(scores, n, "scores")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(eval::precision_at_k(&l, s, k_percent))?;
        Ok(())
    })
}

fn build_cohort(config: &CohortConfig) -> listenership::Result<LsCohort> {
    let cohort = synthcohort::generate_cohort(config)?;
    let trajectories = ingest::build_trajectories(&cohort.records, &SummaryConfig::default())?;
    Ok(LsCohort { cohort, trajectories })
}

/// Generates a cohort from a JSON cohort config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_generate(config_json: *const c_char, out: *mut *mut LsCohort) -> LsStatus {
    guard(|| {
        let json = str_arg(config_json, "config_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = lib(listenership::pipeline::parse_cohort_config(json))?;
        *out = Box::into_raw(Box::new(lib(build_cohort(&config))?));
        Ok(())
    })
}

/// Generates the default four-archetype cohort of `n_beneficiaries`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_generate_default(
    n_beneficiaries: usize,
    seed: u64,
    out: *mut *mut LsCohort,
) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = synthcohort::default_bucket_archetypes(n_beneficiaries);
        config.seed = seed;
        *out = Box::into_raw(Box::new(lib(build_cohort(&config))?));
        Ok(())
    })
}

/// Number of call-attempt records, or 0 for a null handle.
///
/// # Safety
/// `cohort` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_record_count(cohort: *const LsCohort) -> usize {
    cohort.as_ref().map_or(0, |c| c.cohort.records.len())
}

/// Number of beneficiaries, or 0 for a null handle.
///
/// # Safety
/// `cohort` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_beneficiary_count(cohort: *const LsCohort) -> usize {
    cohort.as_ref().map_or(0, |c| c.cohort.members.len())
}

/// Share of attempted beneficiary-weeks never picked up.
///
/// # Safety
/// `cohort` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_never_reached(cohort: *const LsCohort, out: *mut f64) -> LsStatus {
    guard(|| {
        let c = cohort.as_ref().ok_or_else(|| null("cohort"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let curve = lib(analytics::attempt_efficacy(
            c.trajectories.values(),
            EfficacyUnit::BeneficiaryWeek,
        ))?;
        *out = curve.never_reached;
        Ok(())
    })
}

/// Writes the cohort's call records as CSV in the ingest schema.
///
/// # Safety
/// `cohort` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_write_csv(cohort: *const LsCohort, path: *const c_char) -> LsStatus {
    guard(|| {
        let c = cohort.as_ref().ok_or_else(|| null("cohort"))?;
        let path = str_arg(path, "path")?;
        let file = lib(std::fs::File::create(path).map_err(Error::from))?;
        lib(ingest::write_call_records(&c.cohort.records, std::io::BufWriter::new(file)))
    })
}

/// Releases a cohort handle. Null is ignored.
///
/// # Safety
/// `cohort` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_cohort_free(cohort: *mut LsCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Loads a model from its JSON manifest (the weight blob sits beside it).
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_model_load(manifest_path: *const c_char, out: *mut *mut LsModel) -> LsStatus {
    guard(|| {
        let path = str_arg(manifest_path, "manifest_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let artifact = lib(ModelArtifact::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(LsModel { artifact }));
        Ok(())
    })
}

/// Feature columns the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_model_input_dim(model: *const LsModel) -> usize {
    model.as_ref().map_or(0, |m| m.artifact.architecture.input_dim())
}

unsafe fn score_with(
    model: *const LsModel,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
    raw: bool,
) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_arg(features, n_rows * n_cols, "features")?;
        if out_scores.is_null() {
            return Err(null("out_scores"));
        }
        let view = lib(ArrayView2::from_shape((n_rows, n_cols), x).map_err(|e| Error::Shape(e.to_string())))?;
        let scores = if raw {
            lib(models::score_raw(&m.artifact, view))?
        } else {
            lib(models::score(&m.artifact, view))?
        };
        std::slice::from_raw_parts_mut(out_scores, n_rows).copy_from_slice(&scores);
        Ok(())
    })
}

/// Scores `n_rows` standardized row-major feature rows into `out_scores`.
///
/// # Safety
/// `features` must hold `n_rows * n_cols` values; `out_scores` room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn ls_model_score(
    model: *const LsModel,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
) -> LsStatus {
    score_with(model, features, n_rows, n_cols, out_scores, false)
}

/// As [`ls_model_score`], but standardizes raw features with the model's
/// stored training statistics first.
///
/// # Safety
/// As [`ls_model_score`].
#[no_mangle]
pub unsafe extern "C" fn ls_model_score_raw(
    model: *const LsModel,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
) -> LsStatus {
    score_with(model, features, n_rows, n_cols, out_scores, true)
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_model_free(model: *mut LsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
