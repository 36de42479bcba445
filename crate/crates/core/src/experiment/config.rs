use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{PcbTarget, SplitRatios};
use crate::error::{Error, Result};
use crate::text::TextEncoderSpec;
use crate::zoo::LossConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub architecture: u8,
    pub pcb_target: PcbTarget,
    /// Epochs for any model reading text.
    pub text_epochs: usize,
    /// Epochs for models reading only ratings.
    pub rating_epochs: usize,
    pub lr: f64,
    /// Overrides `lr` for rating-only models when set.
    pub rating_lr: Option<f64>,
    pub text_batch_size: usize,
    /// `None` trains rating-only models full-batch.
    pub rating_batch_size: Option<usize>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub split: SplitRatios,
    /// Draw a fresh split per repetition instead of fixing it by `base_seed`.
    pub resplit: bool,
    pub encoder: TextEncoderSpec,
    pub loss: LossConfig,
    /// Validation checkpoints per training run (diagnostics only).
    pub validation_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            architecture: 1,
            pcb_target: PcbTarget::Repurchase,
            text_epochs: 10,
            rating_epochs: 2000,
            lr: 1e-5,
            rating_lr: None,
            text_batch_size: 16,
            rating_batch_size: None,
            repetitions: 5,
            base_seed: 42,
            split: SplitRatios::default(),
            resplit: false,
            encoder: TextEncoderSpec::default(),
            loss: LossConfig::default(),
            validation_points: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        crate::zoo::ArchitectureSpec::for_id(self.architecture, self.encoder.embedding_dim)?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.text_epochs == 0 || self.rating_epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.text_batch_size == 0 || self.rating_batch_size == Some(0) {
            return bad("batch sizes must be positive");
        }
        let lrs = [Some(self.lr), self.rating_lr];
        if lrs.into_iter().flatten().any(|lr| !(lr >= 0.0 && lr.is_finite())) {
            return bad("learning rates must be finite and non-negative");
        }
        if self.encoder.embedding_dim == 0 || self.encoder.max_sequence_length == 0 {
            return bad("encoder dimensions must be positive");
        }
        let w = [self.loss.appraisal_weight, self.loss.emotion_weight];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("loss weights must be finite and non-negative");
        }
        crate::data::split(3, self.split, 0).map(|_| ())
    }

    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        self.base_seed.wrapping_add(repetition as u64)
    }

    /// Applies a `key=value` override; see [`apply_override`].
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        apply_override(self, assignment)
    }
}

/// Applies a `key=value` override to any serde config, where `value` is
/// JSON (bare strings are accepted). Nested keys use dots, e.g.
/// `encoder.embedding_dim=64`. Only existing keys can be set.
pub fn apply_override<T: Serialize + DeserializeOwned>(config: &mut T, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut doc = serde_json::to_value(&*config)?;
    let mut slot = &mut doc;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
    }
    *slot = value;
    *config = serde_json::from_value(doc).map_err(|e| Error::Config(format!("override `{assignment}`: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!((c.text_epochs, c.rating_epochs, c.repetitions), (10, 2000, 5));
        assert_eq!(c.lr, 1e-5);
        assert_eq!(c.text_batch_size, 16);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.set("architecture=12").unwrap();
        c.set("pcb_target=promote").unwrap();
        c.set("encoder.embedding_dim=32").unwrap();
        c.set("rating_lr=0.001").unwrap();
        assert_eq!(c.architecture, 12);
        assert_eq!(c.pcb_target, PcbTarget::Promote);
        assert_eq!(c.encoder.embedding_dim, 32);
        assert_eq!(c.rating_lr, Some(0.001));
        assert!(c.set("nope=1").is_err());
        assert!(c.set("architecture").is_err());
        c.set("architecture=13").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"epochs": 3}"#).is_err());
        let c: ExperimentConfig = serde_json::from_str(r#"{"architecture": 2}"#).unwrap();
        assert_eq!(c.rating_epochs, 2000);
    }
}
