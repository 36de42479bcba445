//! Records, Likert segmentation, splits, ingestion and the synthetic generator.

mod ingest;
mod record;
mod segment;
mod split;
pub mod synth;

pub use ingest::{export, ingest, parse, DataFormat};
pub use record::{
    default_appraisal_names, format_appraisal_names, parse_appraisal_names, PcbTarget, ReviewRecord,
    APPRAISAL_COUNT, EMOTION_COUNT, EMOTION_NAMES,
};
pub use segment::{segment_emotion, segment_pcb, Level, SegmentedLabels};
pub use split::{class_distribution, split, DatasetSplit, SplitRatios};
pub use synth::{generate_synthetic, SyntheticConfig};
