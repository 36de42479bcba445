use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::data::{segment_emotion, segment_pcb, PcbTarget, ReviewRecord, APPRAISAL_COUNT, EMOTION_COUNT};
use crate::error::{Error, Result};
use crate::nn::{Ffnn, Linear};
use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::text::{EncoderKind, TextEncoder, TextInput};
use crate::zoo::spec::{ArchitectureSpec, EdgeSpec, Modality, NodeKind};

/// How the 60 appraisal logits are supervised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppraisalEncoding {
    /// Binary cross-entropy over a one-hot block per dimension.
    #[default]
    BinaryOneHot,
    /// Three-way cross-entropy per dimension, averaged over dimensions.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub appraisal_weight: f64,
    pub emotion_weight: f64,
    pub appraisal_encoding: AppraisalEncoding,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            appraisal_weight: 1.0,
            emotion_weight: 1.0,
            appraisal_encoding: AppraisalEncoding::BinaryOneHot,
        }
    }
}

/// Rating on `1..=7` mapped onto `[-1, 1]` for use as network input.
pub fn normalize_rating(r: u8) -> f64 {
    (f64::from(r) - 4.0) / 3.0
}

/// Inputs for one forward pass. Rating tensors hold normalized ratings.
#[derive(Debug, Clone, Default)]
pub struct ModelBatch {
    pub text: Option<TextInput>,
    pub appraisals: Option<Tensor>,
    pub emotions: Option<Tensor>,
}

impl ModelBatch {
    pub fn ratings(records: &[&ReviewRecord]) -> Result<(Tensor, Tensor)> {
        let appr: Vec<Vec<f64>> = records
            .iter()
            .map(|r| r.appraisals.iter().map(|&a| normalize_rating(a)).collect())
            .collect();
        let emo: Vec<Vec<f64>> = records
            .iter()
            .map(|r| r.emotions.iter().map(|&e| normalize_rating(e)).collect())
            .collect();
        Ok((Tensor::from_rows(&appr)?, Tensor::from_rows(&emo)?))
    }

    pub fn batch_size(&self) -> Option<usize> {
        self.text
            .as_ref()
            .map(TextInput::batch_size)
            .or_else(|| self.appraisals.as_ref().map(|t| t.shape()[0]))
            .or_else(|| self.emotions.as_ref().map(|t| t.shape()[0]))
    }
}

/// Segmented supervision for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub pcb: Vec<usize>,
    /// `b * 20` appraisal classes, row-major.
    pub appraisal_classes: Vec<usize>,
    /// `[b, 8]` emotion flags.
    pub emotion_flags: Tensor,
}

impl Targets {
    pub fn from_records(records: &[&ReviewRecord], target: PcbTarget) -> Result<Self> {
        let mut pcb = Vec::with_capacity(records.len());
        let mut appraisal_classes = Vec::with_capacity(records.len() * APPRAISAL_COUNT);
        let mut flags = Vec::with_capacity(records.len() * EMOTION_COUNT);
        for r in records {
            pcb.push(segment_pcb(r.pcb(target))?.index());
            for &a in &r.appraisals {
                appraisal_classes.push(segment_pcb(a)?.index());
            }
            for &e in &r.emotions {
                flags.push(f64::from(segment_emotion(e)?));
            }
        }
        Ok(Self {
            pcb,
            appraisal_classes,
            emotion_flags: Tensor::new(vec![records.len(), EMOTION_COUNT], flags)?,
        })
    }

    fn appraisal_one_hot(&self) -> Result<Tensor> {
        let b = self.appraisal_classes.len() / APPRAISAL_COUNT;
        let mut t = Tensor::zeros(&[b, APPRAISAL_COUNT * 3]);
        for (i, &c) in self.appraisal_classes.iter().enumerate() {
            t.data_mut()[i * 3 + c] = 1.0;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub pcb_logits: Var,
    pub appraisal_logits: Option<Var>,
    pub emotion_logits: Option<Var>,
    /// Value of every graph node, for introspection.
    pub nodes: BTreeMap<NodeKind, Var>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub pcb: Var,
    pub appraisal: Option<Var>,
    pub emotion: Option<Var>,
}

/// A built architecture: its spec, encoder and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub spec: ArchitectureSpec,
    pub encoder: Option<TextEncoder>,
    pub params: ParamStore,
}

fn edge_ffnn(edge: &EdgeSpec, in_dim: usize) -> Ffnn {
    let prefix = edge.prefix();
    let mut fan_in = in_dim;
    let layers = edge
        .widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let l = Linear {
                prefix: format!("{prefix}.{i}"),
                in_dim: fan_in,
                out_dim: w,
            };
            fan_in = w;
            l
        })
        .collect();
    Ffnn {
        layers,
        activate_output: edge.activate_output,
    }
}

impl ModelInstance {
    /// Builds architecture `id`. `encoder` is required iff the architecture
    /// reads text; `vocab_size` is ignored otherwise.
    pub fn build(id: u8, encoder: Option<EncoderKind>, vocab_size: usize, seed: u64) -> Result<Self> {
        let d = encoder.as_ref().map_or(0, EncoderKind::output_dim);
        let spec = ArchitectureSpec::for_id(id, d)?;
        Self::from_spec(spec, encoder, vocab_size, seed)
    }

    pub fn from_spec(spec: ArchitectureSpec, encoder: Option<EncoderKind>, vocab_size: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoder = match (spec.has_input(Modality::Text), encoder) {
            (true, Some(kind)) => {
                if Some(kind.output_dim()) != spec.text_dim() {
                    return Err(Error::Dimension(format!(
                        "encoder width {} does not match text node width {:?}",
                        kind.output_dim(),
                        spec.text_dim()
                    )));
                }
                Some(TextEncoder::register(kind, vocab_size, &mut params, &mut rng)?)
            }
            (true, None) => return Err(Error::Config(format!("architecture {} needs a text encoder", spec.id))),
            (false, _) => None,
        };
        for e in &spec.edges {
            let in_dim = spec.node(e.from).expect("validated").width;
            Ffnn::register(&mut params, &e.prefix(), in_dim, &e.widths, e.activate_output, &mut rng)?;
        }
        Ok(Self { spec, encoder, params })
    }

    pub fn describe(&self) -> String {
        self.spec.describe()
    }

    pub fn edge_ffnn(&self, edge: &EdgeSpec) -> Ffnn {
        edge_ffnn(edge, self.spec.node(edge.from).expect("validated").width)
    }

    /// Parameter paths in registration-independent sorted order.
    pub fn param_paths(&self) -> Vec<String> {
        self.params.iter().map(|(k, _)| k.clone()).collect()
    }

    /// Parameters reachable backwards from the PCB head.
    pub fn pcb_path_params(&self) -> Vec<String> {
        let mut live = vec![NodeKind::PcbHead];
        let mut paths = Vec::new();
        for e in self.spec.edges.iter().rev() {
            if live.contains(&e.to) {
                live.push(e.from);
                paths.extend(self.edge_ffnn(e).param_paths());
            }
        }
        if live.contains(&NodeKind::TextEmbedding) {
            if let Some(enc) = &self.encoder {
                paths.extend(enc.param_paths());
            }
        }
        paths.sort();
        paths
    }

    pub fn forward(&self, graph: &mut Graph, batch: &ModelBatch) -> Result<ForwardOutput> {
        let text = match (&self.encoder, self.spec.has_input(Modality::Text)) {
            (Some(enc), true) => {
                let input = batch
                    .text
                    .as_ref()
                    .ok_or_else(|| Error::MissingModality(Modality::Text.to_string()))?;
                Some(enc.encode(graph, &self.params, input)?)
            }
            _ => None,
        };
        self.forward_from_text(graph, text, batch)
    }

    /// Forward pass with the text embedding already computed (used to route
    /// custom token embeddings through the encoder).
    pub fn forward_from_text(&self, graph: &mut Graph, text: Option<Var>, batch: &ModelBatch) -> Result<ForwardOutput> {
        let mut values: BTreeMap<NodeKind, Var> = BTreeMap::new();
        for node in &self.spec.nodes {
            let v = match node.kind.input_modality() {
                Some(Modality::Text) => text.ok_or_else(|| Error::MissingModality(Modality::Text.to_string()))?,
                Some(m) => {
                    let t = match m {
                        Modality::Appraisals => batch.appraisals.as_ref(),
                        _ => batch.emotions.as_ref(),
                    }
                    .ok_or_else(|| Error::MissingModality(m.to_string()))?;
                    let (_, w) = t.dims2()?;
                    if w != node.width {
                        return Err(Error::Dimension(format!("{m} input has width {w}, expected {}", node.width)));
                    }
                    graph.constant(t.clone())
                }
                None => {
                    let mut parts = Vec::new();
                    for e in self.spec.incoming(node.kind) {
                        let x = values[&e.from];
                        parts.push(self.edge_ffnn(e).forward(graph, &self.params, x)?);
                    }
                    if parts.len() == 1 {
                        parts[0]
                    } else {
                        graph.concat(&parts, 1)?
                    }
                }
            };
            values.insert(node.kind, v);
        }
        let aux = |m: Modality, k: NodeKind| {
            if self.spec.has_auxiliary(m) {
                values.get(&k).copied()
            } else {
                None
            }
        };
        Ok(ForwardOutput {
            pcb_logits: values[&NodeKind::PcbHead],
            appraisal_logits: aux(Modality::Appraisals, NodeKind::AppraisalHead),
            emotion_logits: aux(Modality::Emotions, NodeKind::EmotionHead),
            nodes: values,
        })
    }

    /// PCB cross-entropy plus weighted auxiliary losses for declared heads.
    pub fn loss(&self, graph: &mut Graph, out: &ForwardOutput, targets: &Targets, cfg: &LossConfig) -> Result<LossParts> {
        let pcb = graph.cross_entropy(out.pcb_logits, &targets.pcb)?;
        let mut total = pcb;
        let appraisal = match out.appraisal_logits {
            Some(z) => Some(match cfg.appraisal_encoding {
                AppraisalEncoding::BinaryOneHot => graph.binary_cross_entropy(z, &targets.appraisal_one_hot()?)?,
                AppraisalEncoding::Categorical => {
                    let b = graph.value(z).shape()[0];
                    let flat = graph.reshape(z, vec![b * APPRAISAL_COUNT, 3])?;
                    graph.cross_entropy(flat, &targets.appraisal_classes)?
                }
            }),
            None => None,
        };
        if let Some(l) = appraisal {
            let s = graph.scale(l, cfg.appraisal_weight);
            total = graph.add(total, s)?;
        }
        let emotion = match out.emotion_logits {
            Some(z) => Some(graph.binary_cross_entropy(z, &targets.emotion_flags)?),
            None => None,
        };
        if let Some(l) = emotion {
            let s = graph.scale(l, cfg.emotion_weight);
            total = graph.add(total, s)?;
        }
        Ok(LossParts {
            total,
            pcb,
            appraisal,
            emotion,
        })
    }

    /// Copies the weights of a trained single-modality component into the
    /// edges that declare it, and freezes them.
    pub fn adopt_component(&mut self, component: &ModelInstance) -> Result<()> {
        let id = component.spec.id;
        let edges: Vec<EdgeSpec> = self
            .spec
            .edges
            .iter()
            .filter(|e| e.frozen_from == Some(id))
            .cloned()
            .collect();
        if edges.is_empty() {
            return Err(Error::Config(format!(
                "architecture {} does not use component {id}",
                self.spec.id
            )));
        }
        for e in edges {
            let mut pairs = Vec::new();
            if e.from == NodeKind::TextEmbedding {
                let (Some(mine), Some(theirs)) = (&self.encoder, &component.encoder) else {
                    return Err(Error::Capability(format!("component {id} has no text encoder")));
                };
                if mine != theirs {
                    return Err(Error::Config(format!("component {id} uses a different text encoder")));
                }
                pairs.extend(mine.param_paths().into_iter().map(|p| (p.clone(), p)));
            }
            let source = component
                .spec
                .edges
                .iter()
                .find(|s| s.from == e.from && s.to == NodeKind::PcbHead)
                .ok_or_else(|| Error::Config(format!("component {id} has no edge from {}", e.from.as_str())))?;
            let src = component.edge_ffnn(source);
            let dst = self.edge_ffnn(&e);
            if src.layers.len() < dst.layers.len() {
                return Err(Error::Config(format!("component {id} trunk is too shallow")));
            }
            for (s, d) in src.param_paths().into_iter().zip(dst.param_paths()) {
                pairs.push((s, d));
            }
            for (s, d) in pairs {
                let value = component.params.value(&s)?.clone();
                let p = self.params.get_mut(&d)?;
                if p.value.shape() != value.shape() {
                    return Err(Error::Dimension(format!(
                        "component parameter `{s}` {:?} does not fit `{d}` {:?}",
                        value.shape(),
                        p.value.shape()
                    )));
                }
                p.value = value;
                p.trainable = false;
            }
        }
        Ok(())
    }
}
