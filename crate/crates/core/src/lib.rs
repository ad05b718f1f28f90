//! Weekly listenership trajectories from IVR call-detail records, cohort
//! analytics over them, and classifiers that flag beneficiaries likely to
//! become low listeners.

pub mod analytics;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod slots;
pub mod synthcohort;

pub use error::{Error, Result};
