use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pcb_core::data::PcbTarget;
use pcb_core::experiment::ExperimentConfig;
use pcb_core::io::{read_to_string, write_atomic};
use pcb_core::text::Vocabulary;
use pcb_core::zoo::ModelInstance;
use pcb_core::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "pcb-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Contents of a `train` config file. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: PathBuf,
    /// JSON lines of `{"id", "embedding"}` replacing the trainable encoder.
    #[serde(default)]
    pub precomputed_embeddings: Option<PathBuf>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.precomputed_embeddings = cfg.precomputed_embeddings.map(|p| base.join(p));
        Ok(cfg)
    }
}

/// A trained model with everything needed to run it on raw text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub pcb_target: PcbTarget,
    pub repetition: usize,
    pub seed: u64,
    /// Present for models that read tokens.
    pub vocab: Option<Vocabulary>,
    pub model: ModelInstance,
}

impl Checkpoint {
    pub fn new(model: ModelInstance, vocab: Option<Vocabulary>, pcb_target: PcbTarget, repetition: usize, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            pcb_target,
            repetition,
            seed,
            vocab,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Self = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Serde(format!(
                "{}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        ck.model.spec.validate()?;
        Ok(ck)
    }
}

/// Record of one command invocation. Together with the config snapshot and
/// seeds it reproduces every numeric artifact listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<PathBuf>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config,
            seeds: Vec::new(),
            artifacts: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}
