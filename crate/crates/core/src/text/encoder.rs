use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::params::{uniform, ParamStore};
use crate::tensor::Tensor;
use crate::text::vocab::PAD_ID;

pub const EMBEDDING_PATH: &str = "encoder.embedding";
pub const PROJECTION_PREFIX: &str = "encoder.projection";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextEncoderSpec {
    /// Width of the token embeddings and of the projected text embedding.
    pub embedding_dim: usize,
    /// Longer texts are truncated from the tail.
    pub max_sequence_length: usize,
    pub min_token_frequency: usize,
    /// Token embeddings start as `U(-a, a)` with `a = sqrt(3) * init_std`.
    pub init_std: f64,
}

impl Default for TextEncoderSpec {
    fn default() -> Self {
        Self {
            embedding_dim: 128,
            max_sequence_length: 256,
            min_token_frequency: 2,
            init_std: 1.0,
        }
    }
}

/// Which implementation fills the text-embedding slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    /// Mean-pooled trainable token embeddings followed by one linear projection.
    Trainable(TextEncoderSpec),
    /// Embeddings computed elsewhere and supplied per record.
    Precomputed { dim: usize },
}

impl EncoderKind {
    pub fn output_dim(&self) -> usize {
        match self {
            EncoderKind::Trainable(s) => s.embedding_dim,
            EncoderKind::Precomputed { dim } => *dim,
        }
    }
}

/// Padded token ids with an attention mask that is 0 exactly on pad positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub token_ids: Vec<usize>,
    pub attention_mask: Vec<f64>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl EncodedBatch {
    /// Truncates each sequence to `max_len` and pads to the longest one.
    pub fn from_sequences(seqs: &[Vec<usize>], max_len: usize) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::Size("empty text batch".into()));
        }
        let seq_len = seqs.iter().map(|s| s.len().min(max_len)).max().unwrap_or(0).max(1);
        let mut token_ids = Vec::with_capacity(seqs.len() * seq_len);
        let mut attention_mask = Vec::with_capacity(seqs.len() * seq_len);
        for s in seqs {
            let kept = &s[..s.len().min(max_len)];
            token_ids.extend_from_slice(kept);
            attention_mask.extend(std::iter::repeat_n(1.0, kept.len()));
            token_ids.extend(std::iter::repeat_n(PAD_ID, seq_len - kept.len()));
            attention_mask.extend(std::iter::repeat_n(0.0, seq_len - kept.len()));
        }
        Ok(Self {
            token_ids,
            attention_mask,
            batch_size: seqs.len(),
            seq_len,
        })
    }

    /// Repeats every sequence `times` times (sequence-major).
    pub fn repeat(&self, times: usize) -> Self {
        let mut out = Self {
            token_ids: Vec::new(),
            attention_mask: Vec::new(),
            batch_size: self.batch_size * times,
            seq_len: self.seq_len,
        };
        for i in 0..self.batch_size {
            let r = i * self.seq_len..(i + 1) * self.seq_len;
            for _ in 0..times {
                out.token_ids.extend_from_slice(&self.token_ids[r.clone()]);
                out.attention_mask.extend_from_slice(&self.attention_mask[r.clone()]);
            }
        }
        out
    }
}

/// Text input handed to a model.
#[derive(Debug, Clone, PartialEq)]
pub enum TextInput {
    Tokens(EncodedBatch),
    Embeddings(Tensor),
}

impl TextInput {
    pub fn batch_size(&self) -> usize {
        match self {
            TextInput::Tokens(b) => b.batch_size,
            TextInput::Embeddings(t) => t.shape()[0],
        }
    }
}

/// The registered text encoder of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoder {
    pub kind: EncoderKind,
    pub vocab_size: usize,
}

impl TextEncoder {
    pub fn register(
        kind: EncoderKind,
        vocab_size: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if let EncoderKind::Trainable(spec) = &kind {
            if vocab_size < 2 {
                return Err(Error::Vocabulary("vocabulary has no room for pad/unknown".into()));
            }
            let e = spec.embedding_dim;
            store.insert(
                EMBEDDING_PATH,
                uniform(&[vocab_size, e], 3f64.sqrt() * spec.init_std, rng),
            )?;
            Linear::register(store, PROJECTION_PREFIX, e, e, rng)?;
        }
        Ok(Self { kind, vocab_size })
    }

    pub fn output_dim(&self) -> usize {
        self.kind.output_dim()
    }

    pub fn is_differentiable_to_tokens(&self) -> bool {
        matches!(self.kind, EncoderKind::Trainable(_))
    }

    pub fn param_paths(&self) -> Vec<String> {
        match self.kind {
            EncoderKind::Trainable(_) => vec![
                EMBEDDING_PATH.to_string(),
                format!("{PROJECTION_PREFIX}.weight"),
                format!("{PROJECTION_PREFIX}.bias"),
            ],
            EncoderKind::Precomputed { .. } => Vec::new(),
        }
    }

    fn projection(&self) -> Linear {
        let d = self.output_dim();
        Linear {
            prefix: PROJECTION_PREFIX.to_string(),
            in_dim: d,
            out_dim: d,
        }
    }

    /// Text embedding `[b, d]`.
    pub fn encode(&self, graph: &mut Graph, store: &ParamStore, input: &TextInput) -> Result<Var> {
        match (&self.kind, input) {
            (EncoderKind::Trainable(_), TextInput::Tokens(batch)) => {
                let tokens = self.token_embeddings(graph, store, batch)?;
                self.pool_and_project(graph, store, tokens, batch)
            }
            (EncoderKind::Precomputed { dim }, TextInput::Embeddings(t)) => {
                let (_, d) = t.dims2()?;
                if d != *dim {
                    return Err(Error::Dimension(format!(
                        "precomputed embeddings have width {d}, encoder expects {dim}"
                    )));
                }
                Ok(graph.constant(t.clone()))
            }
            (EncoderKind::Trainable(_), TextInput::Embeddings(_)) => Err(Error::Capability(
                "trainable encoder needs token ids, got precomputed embeddings".into(),
            )),
            (EncoderKind::Precomputed { .. }, TextInput::Tokens(_)) => Err(Error::Capability(
                "precomputed-embedding encoder cannot consume token ids".into(),
            )),
        }
    }

    /// Looked-up token embeddings `[b * seq_len, e]`.
    pub fn token_embeddings(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        batch: &EncodedBatch,
    ) -> Result<Var> {
        if let Some(&bad) = batch.token_ids.iter().find(|&&id| id >= self.vocab_size) {
            return Err(Error::Vocabulary(format!(
                "token id {bad} outside vocabulary of size {}",
                self.vocab_size
            )));
        }
        let table = graph.param(store, EMBEDDING_PATH)?;
        graph.embedding_lookup(table, &batch.token_ids)
    }

    /// Masked mean over the unmasked positions followed by the projection.
    pub fn pool_and_project(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        token_embeddings: Var,
        batch: &EncodedBatch,
    ) -> Result<Var> {
        let pooled = graph.masked_mean(token_embeddings, &batch.attention_mask, batch.seq_len)?;
        self.projection().forward(graph, store, pooled)
    }
}

/// Record id to embedding vector, loaded from JSON lines
/// `{"id": "...", "embedding": [..]}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    embedding: Vec<f64>,
}

impl PrecomputedEmbeddings {
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingLine = serde_json::from_str(line)
                .map_err(|e| Error::Serde(format!("line {}: {e}", i + 1)))?;
            if out.vectors.is_empty() {
                out.dim = rec.embedding.len();
            }
            if rec.embedding.len() != out.dim || out.dim == 0 {
                return Err(Error::Dimension(format!(
                    "line {}: embedding has {} values, expected {}",
                    i + 1,
                    rec.embedding.len(),
                    out.dim
                )));
            }
            out.vectors.insert(rec.id, rec.embedding);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::io::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for (id, v) in &self.vectors {
            s.push_str(&serde_json::to_string(&EmbeddingLine {
                id: id.clone(),
                embedding: v.clone(),
            })?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn batch(&self, ids: &[&str]) -> Result<Tensor> {
        let rows = ids
            .iter()
            .map(|id| {
                self.vectors
                    .get(*id)
                    .cloned()
                    .ok_or_else(|| Error::Lookup(format!("no precomputed embedding for record `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }
}
