//! Shared fixtures for the benchmarks.

use pcb_core::data::{generate_synthetic, SyntheticConfig};
use pcb_core::experiment::{prepare, ExperimentConfig, PreparedData};
use pcb_core::text::EncoderKind;
use pcb_core::zoo::{ArchitectureSpec, Modality, ModelInstance};

/// Zero-noise synthetic data prepared for `architecture`, and a fresh model.
pub fn fixture(architecture: u8, records: usize) -> (ExperimentConfig, PreparedData, ModelInstance) {
    let syn = SyntheticConfig { record_count: records, noise_scale: 0.0, ..Default::default() };
    let records = generate_synthetic(&syn).expect("default generator config is valid");
    let cfg = ExperimentConfig { architecture, ..Default::default() };
    let data = prepare(&cfg, &records, None, cfg.base_seed).expect("split of a non-empty dataset");
    let reads_text = ArchitectureSpec::for_id(architecture, cfg.encoder.embedding_dim)
        .expect("architecture id in range")
        .has_input(Modality::Text);
    let encoder: Option<EncoderKind> = reads_text.then(|| data.encoder.clone());
    let model = ModelInstance::build(architecture, encoder, data.vocab.len(), 1).expect("valid architecture");
    (cfg, data, model)
}
