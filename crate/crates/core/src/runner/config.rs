use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::RenditionsMode;
use crate::error::{Error, Result};
use crate::nnet::TrainConfig;
use crate::pooling::PoolingKind;
use crate::stats::BootstrapConfig;

/// One experiment, as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest_path: PathBuf,
    pub labels_path: PathBuf,
    /// Encoder layers to concatenate per frame; empty keeps every stored layer.
    pub layer_range: Vec<u32>,
    pub pooling: PoolingKind,
    pub folds: usize,
    /// Seed of the piece-to-fold assignment and validation carving.
    pub seed: u64,
    pub renditions_mode: RenditionsMode,
    pub val_fraction: f64,
    pub bootstrap: BootstrapConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest_path: PathBuf::from("manifest.json"),
            labels_path: PathBuf::from("labels.csv"),
            layer_range: Vec::new(),
            pooling: PoolingKind::Mean,
            folds: 4,
            seed: 42,
            renditions_mode: RenditionsMode::All,
            val_fraction: 0.15,
            bootstrap: BootstrapConfig::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    /// Applies `dotted.path=value` overrides. Values are parsed as JSON and
    /// fall back to plain strings; every path must name an existing field.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let (path, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{}' is not path=value", o.as_ref())))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, path, value)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        let mut layers = self.layer_range.clone();
        layers.sort_unstable();
        if layers.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("layer_range repeats a layer".into()));
        }
        for (name, p) in [("manifest_path", &self.manifest_path), ("labels_path", &self.labels_path)] {
            if !p.is_file() {
                return Err(Error::Config(format!("{name} '{}' is not a file", p.display())));
            }
        }
        self.bootstrap.validate()?;
        self.train.validate()
    }

    /// The config as compared for fingerprinting: every field except
    /// `output_dir`, with object keys sorted.
    pub fn normalized(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
        }
        v
    }

    /// SHA-256 of the compact normalized JSON.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(&self.normalized()).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("'{}' is not an object", parts[..i].join("."))))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config field '{}'", parts[..=i].join("."))))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        cur = slot;
    }
    Err(Error::Config("empty override path".into()))
}
