//! Model artifacts: a JSON manifest next to a raw weight blob.
//!
//! The blob holds every parameter as a little-endian IEEE-754 binary64, in
//! manifest `shapes` order, each block row-major, with no header or padding.
//! Its length is therefore exactly `8 * sum(prod(dims))` bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::network::{Architecture, Network, ParamShape};
use super::{ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, StandardizationStats, Target};

pub const ARTIFACT_FORMAT: &str = "listenership-model/1";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelArtifact {
    pub kind: ModelKind,
    pub architecture: Architecture,
    pub params: Vec<f64>,
    pub stats: Option<StandardizationStats>,
    pub train_config: TrainConfig,
    pub feature_set: FeatureSet,
    pub n_weeks: usize,
    pub target: Target,
    pub seed: u64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    kind: ModelKind,
    architecture: Architecture,
    shapes: Vec<ParamShape>,
    n_params: usize,
    weights_file: String,
    feature_set: FeatureSet,
    n_weeks: usize,
    target: Target,
    seed: u64,
    train_config: TrainConfig,
    stats: Option<StandardizationStats>,
    loss_history: Vec<f64>,
}

impl ModelArtifact {
    pub fn network(&self) -> Result<Network> {
        Network::from_params(self.architecture.clone(), self.params.clone())
    }

    pub fn weights_to_bytes(&self) -> Vec<u8> {
        self.params.iter().flat_map(|p| p.to_le_bytes()).collect()
    }

    pub fn manifest_json(&self, weights_file: &str) -> Result<String> {
        let manifest = Manifest {
            format: ARTIFACT_FORMAT.into(),
            kind: self.kind,
            architecture: self.architecture.clone(),
            shapes: self.architecture.param_shapes(),
            n_params: self.params.len(),
            weights_file: weights_file.into(),
            feature_set: self.feature_set,
            n_weeks: self.n_weeks,
            target: self.target,
            seed: self.seed,
            train_config: self.train_config.clone(),
            stats: self.stats.clone(),
            loss_history: self.loss_history.clone(),
        };
        Ok(serde_json::to_string_pretty(&manifest)? + "\n")
    }

    /// Writes `<stem>.json` and `<stem>.bin` into `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let weights_file = format!("{stem}.bin");
        fs::write(dir.join(&weights_file), self.weights_to_bytes())?;
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, self.manifest_json(&weights_file)?)?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let blob = fs::read(dir.join(&manifest.weights_file))?;
        Self::from_parts(manifest, &blob)
    }

    /// Rebuilds an artifact from manifest text and weight bytes.
    pub fn from_json_and_weights(json: &str, blob: &[u8]) -> Result<Self> {
        Self::from_parts(serde_json::from_str(json)?, blob)
    }

    fn from_parts(manifest: Manifest, blob: &[u8]) -> Result<Self> {
        if manifest.format != ARTIFACT_FORMAT {
            return Err(Error::InvalidInput(format!("unknown artifact format {:?}", manifest.format)));
        }
        if manifest.shapes != manifest.architecture.param_shapes() {
            return Err(Error::Shape("manifest shapes disagree with its architecture".into()));
        }
        let declared: usize = manifest.shapes.iter().map(ParamShape::len).sum();
        if declared != manifest.n_params || blob.len() != 8 * declared {
            return Err(Error::Shape(format!(
                "weight blob of {} bytes for {} declared parameters",
                blob.len(),
                declared
            )));
        }
        let params = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            kind: manifest.kind,
            architecture: manifest.architecture,
            params,
            stats: manifest.stats,
            train_config: manifest.train_config,
            feature_set: manifest.feature_set,
            n_weeks: manifest.n_weeks,
            target: manifest.target,
            seed: manifest.seed,
            loss_history: manifest.loss_history,
        })
    }
}
