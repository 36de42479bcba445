//! The twelve architectures as declarative graphs plus a generic interpreter.

mod model;
mod spec;

pub use model::{
    normalize_rating, AppraisalEncoding, ForwardOutput, LossConfig, LossParts, ModelBatch, ModelInstance, Targets,
};
pub use spec::{
    ArchitectureSpec, EdgeSpec, Family, Modality, NodeKind, NodeSpec, APPRAISAL_LOGITS, ARCHITECTURE_IDS, PCB_CLASSES,
};
