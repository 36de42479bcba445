//! Integrated-Gradients token attribution for text-reading models.
//!
//! For token embeddings `x` and a baseline `x'`, the attribution of
//! embedding coordinate `i` is `(x_i - x'_i)` times the mean of `dF/dx_i`
//! over the midpoints `alpha_k = (k + 1/2) / steps` of the straight path
//! `x' + alpha (x - x')`, where `F` is one PCB logit. Token scores sum their
//! coordinates. By completeness, the scores sum to `F(x) - F(x')` as the
//! number of steps grows; the residual is reported as `completeness_gap`.

mod html;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::data::ReviewRecord;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::{tokenize, EncodedBatch, EncoderKind, TextEncoder, Vocabulary, EMBEDDING_PATH, PAD_ID};
use crate::zoo::{normalize_rating, Modality, ModelBatch, ModelInstance, PCB_CLASSES};

pub use html::render_html;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Every position holds the pad-token embedding.
    #[default]
    Pad,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionTarget {
    /// The gold PCB class of the record.
    #[default]
    Gold,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgConfig {
    pub steps: usize,
    pub baseline: Baseline,
    /// Path points evaluated per forward pass.
    pub chunk: usize,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: 128,
            baseline: Baseline::Pad,
            chunk: 64,
        }
    }
}

/// One text with any rating inputs the model also reads (normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionInput {
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    pub appraisals: Option<Vec<f64>>,
    pub emotions: Option<Vec<f64>>,
}

impl AttributionInput {
    /// Tokenizes and truncates `text` the same way training does.
    pub fn from_text(text: &str, vocab: &Vocabulary, max_len: usize) -> Self {
        let mut tokens = tokenize(text);
        tokens.truncate(max_len);
        let token_ids = vocab.encode(&tokens);
        Self {
            tokens,
            token_ids,
            appraisals: None,
            emotions: None,
        }
    }

    /// Text plus whichever rating inputs `model` reads.
    pub fn from_record(record: &ReviewRecord, vocab: &Vocabulary, model: &ModelInstance) -> Self {
        let max_len = match model.encoder.as_ref().map(|e| &e.kind) {
            Some(EncoderKind::Trainable(spec)) => spec.max_sequence_length,
            _ => usize::MAX,
        };
        let mut input = Self::from_text(&record.text, vocab, max_len);
        if model.spec.has_input(Modality::Appraisals) {
            input.appraisals = Some(record.appraisals.iter().map(|&r| normalize_rating(r)).collect());
        }
        if model.spec.has_input(Modality::Emotions) {
            input.emotions = Some(record.emotions.iter().map(|&r| normalize_rating(r)).collect());
        }
        input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub record_id: Option<String>,
    pub tokens: Vec<String>,
    /// Signed score per token, aligned with `tokens`.
    pub scores: Vec<f64>,
    pub target_class: usize,
    pub predicted_class: usize,
    /// `F(x)`, the target logit at the input.
    pub target_logit: f64,
    /// `F(x')`, the target logit at the baseline.
    pub baseline_logit: f64,
    pub attribution_sum: f64,
    /// `|sum of scores - (F(x) - F(x'))|`.
    pub completeness_gap: f64,
    pub steps: usize,
    pub baseline: Baseline,
}

impl AttributionReport {
    /// Gap relative to `|F(x) - F(x')|`.
    pub fn relative_gap(&self) -> f64 {
        self.completeness_gap / (self.target_logit - self.baseline_logit).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedToken {
    pub position: usize,
    pub token: String,
    pub score: f64,
}

/// The `k` tokens with the largest `|score|`; ties go to the earlier
/// position. `k` is clamped to the token count.
pub fn rank_tokens(report: &AttributionReport, k: usize) -> Vec<RankedToken> {
    let mut order: Vec<usize> = (0..report.scores.len()).collect();
    order.sort_by(|&a, &b| {
        report.scores[b]
            .abs()
            .total_cmp(&report.scores[a].abs())
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(k)
        .map(|i| RankedToken {
            position: i,
            token: report.tokens[i].clone(),
            score: report.scores[i],
        })
        .collect()
}

/// Capability error unless gradients reach `model`'s token embeddings.
pub fn ensure_attributable(model: &ModelInstance) -> Result<()> {
    trainable_encoder(model).map(|_| ())
}

fn trainable_encoder(model: &ModelInstance) -> Result<&TextEncoder> {
    match &model.encoder {
        Some(enc) if model.spec.has_input(Modality::Text) && enc.is_differentiable_to_tokens() => Ok(enc),
        Some(_) => Err(Error::Capability(format!(
            "architecture {} reads precomputed embeddings; no gradient reaches tokens",
            model.spec.id
        ))),
        None => Err(Error::Capability(format!(
            "architecture {} ({}) has no text input to attribute",
            model.spec.id, model.spec.name
        ))),
    }
}

fn repeat_rows(row: &Option<Vec<f64>>, times: usize) -> Result<Option<Tensor>> {
    row.as_ref()
        .map(|r| {
            let data: Vec<f64> = std::iter::repeat_n(r.iter().copied(), times).flatten().collect();
            Tensor::new(vec![times, r.len()], data)
        })
        .transpose()
}

struct PathEvaluator<'a> {
    model: &'a ModelInstance,
    encoder: &'a TextEncoder,
    input: &'a AttributionInput,
    len: usize,
    dim: usize,
}

impl PathEvaluator<'_> {
    /// Target logits and, when `grad` is set, `dF/dZ` for the `k` stacked
    /// embedding sequences in `z` (`[k * len, dim]`).
    fn run(&self, z: Tensor, target: usize, grad: bool) -> Result<(Vec<[f64; PCB_CLASSES]>, Option<Tensor>)> {
        let k = z.shape()[0] / self.len.max(1);
        let mut g = Graph::new();
        let zv = if grad { g.variable(z) } else { g.constant(z) };
        let mask = EncodedBatch {
            token_ids: vec![PAD_ID; k * self.len],
            attention_mask: vec![1.0; k * self.len],
            batch_size: k,
            seq_len: self.len,
        };
        let text = self.encoder.pool_and_project(&mut g, &self.model.params, zv, &mask)?;
        let batch = ModelBatch {
            text: None,
            appraisals: repeat_rows(&self.input.appraisals, k)?,
            emotions: repeat_rows(&self.input.emotions, k)?,
        };
        let out = self.model.forward_from_text(&mut g, Some(text), &batch)?;
        let logits: Vec<[f64; PCB_CLASSES]> = g
            .value(out.pcb_logits)
            .data()
            .chunks(PCB_CLASSES)
            .map(|r| [r[0], r[1], r[2]])
            .collect();
        if !grad {
            return Ok((logits, None));
        }
        let mut onehot = Tensor::zeros(&[k, PCB_CLASSES]);
        for i in 0..k {
            onehot.data_mut()[i * PCB_CLASSES + target] = 1.0;
        }
        let sel = g.constant(onehot);
        let picked = g.mul(out.pcb_logits, sel)?;
        let f = g.sum(picked);
        g.backward(f)?;
        let dz = g
            .grad(zv)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&[k * self.len, self.dim]));
        Ok((logits, Some(dz)))
    }
}

fn argmax3(r: &[f64; PCB_CLASSES]) -> usize {
    let mut best = 0;
    for i in 1..PCB_CLASSES {
        if r[i] > r[best] {
            best = i;
        }
    }
    best
}

/// PCB logits for `input`.
pub fn class_logits(model: &ModelInstance, input: &AttributionInput) -> Result<[f64; PCB_CLASSES]> {
    let encoder = trainable_encoder(model)?;
    let x = input_embeddings(model, input)?;
    Ok(evaluator(model, encoder, input).run(x, 0, false)?.0[0])
}

pub fn predict_class(model: &ModelInstance, input: &AttributionInput) -> Result<usize> {
    Ok(argmax3(&class_logits(model, input)?))
}

/// Attributes each `(input, target class)` pair; inputs run in parallel.
pub fn attribute_many(
    model: &ModelInstance,
    jobs: &[(AttributionInput, usize)],
    cfg: &IgConfig,
) -> Result<Vec<AttributionReport>> {
    jobs.par_iter()
        .map(|(input, target)| integrated_gradients(model, input, *target, cfg))
        .collect()
}

fn evaluator<'a>(model: &'a ModelInstance, encoder: &'a TextEncoder, input: &'a AttributionInput) -> PathEvaluator<'a> {
    PathEvaluator {
        model,
        encoder,
        input,
        len: input.token_ids.len().max(1),
        dim: encoder.output_dim(),
    }
}

/// `[len, dim]` token embeddings; an empty text is one all-zero row so
/// that pooling matches the encoder's zero vector for empty input.
fn input_embeddings(model: &ModelInstance, input: &AttributionInput) -> Result<Tensor> {
    let encoder = trainable_encoder(model)?;
    let table = model.params.value(EMBEDDING_PATH)?;
    let dim = encoder.output_dim();
    if input.token_ids.is_empty() {
        return Ok(Tensor::zeros(&[1, dim]));
    }
    let mut data = Vec::with_capacity(input.token_ids.len() * dim);
    for &id in &input.token_ids {
        if id >= encoder.vocab_size {
            return Err(Error::Vocabulary(format!(
                "token id {id} outside vocabulary of size {}",
                encoder.vocab_size
            )));
        }
        data.extend_from_slice(table.row(id));
    }
    Tensor::new(vec![input.token_ids.len(), dim], data)
}

pub fn integrated_gradients(
    model: &ModelInstance,
    input: &AttributionInput,
    target_class: usize,
    cfg: &IgConfig,
) -> Result<AttributionReport> {
    let encoder = trainable_encoder(model)?;
    if cfg.steps == 0 || cfg.chunk == 0 {
        return Err(Error::Config("integrated gradients needs steps >= 1 and chunk >= 1".into()));
    }
    if target_class >= PCB_CLASSES {
        return Err(Error::Label(format!("target class {target_class} outside [0, {PCB_CLASSES})")));
    }
    for (m, row, w) in [
        (Modality::Appraisals, &input.appraisals, crate::data::APPRAISAL_COUNT),
        (Modality::Emotions, &input.emotions, crate::data::EMOTION_COUNT),
    ] {
        match (model.spec.has_input(m), row) {
            (true, None) => return Err(Error::MissingModality(m.to_string())),
            (true, Some(r)) if r.len() != w => {
                return Err(Error::Dimension(format!("{m} row has {} values, expected {w}", r.len())))
            }
            _ => {}
        }
    }
    let x = input_embeddings(model, input)?;
    let (len, dim) = x.dims2()?;
    let baseline = match cfg.baseline {
        // An empty text pools to zeros whatever the baseline token is.
        _ if input.token_ids.is_empty() => x.clone(),
        Baseline::Zero => Tensor::zeros(&[len, dim]),
        Baseline::Pad => {
            let pad = model.params.value(EMBEDDING_PATH)?.row(PAD_ID).to_vec();
            Tensor::new(vec![len, dim], std::iter::repeat_n(pad, len).flatten().collect())?
        }
    };
    let ev = evaluator(model, encoder, input);
    let f_x = ev.run(x.clone(), target_class, false)?.0[0];
    let f_b = ev.run(baseline.clone(), target_class, false)?.0[0];

    let diff: Vec<f64> = x.data().iter().zip(baseline.data()).map(|(a, b)| a - b).collect();
    let mut grad_sum = vec![0.0; len * dim];
    let mut k0 = 0;
    while k0 < cfg.steps {
        let k = cfg.chunk.min(cfg.steps - k0);
        let mut z = Vec::with_capacity(k * len * dim);
        for j in 0..k {
            let alpha = ((k0 + j) as f64 + 0.5) / cfg.steps as f64;
            z.extend(baseline.data().iter().zip(&diff).map(|(b, d)| b + alpha * d));
        }
        let (_, dz) = ev.run(Tensor::new(vec![k * len, dim], z)?, target_class, true)?;
        let dz = dz.expect("gradient requested");
        for j in 0..k {
            let block = &dz.data()[j * len * dim..(j + 1) * len * dim];
            for (s, g) in grad_sum.iter_mut().zip(block) {
                *s += g;
            }
        }
        k0 += k;
    }
    let scores: Vec<f64> = if input.token_ids.is_empty() {
        Vec::new()
    } else {
        (0..len)
            .map(|t| {
                (0..dim)
                    .map(|i| diff[t * dim + i] * grad_sum[t * dim + i] / cfg.steps as f64)
                    .sum()
            })
            .collect()
    };
    let attribution_sum: f64 = scores.iter().sum();
    let target_logit = f_x[target_class];
    let baseline_logit = f_b[target_class];
    Ok(AttributionReport {
        record_id: None,
        tokens: input.tokens.clone(),
        scores,
        target_class,
        predicted_class: argmax3(&f_x),
        target_logit,
        baseline_logit,
        attribution_sum,
        completeness_gap: (attribution_sum - (target_logit - baseline_logit)).abs(),
        steps: cfg.steps,
        baseline: cfg.baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{EncoderKind, TextEncoderSpec};

    fn model(id: u8, vocab: usize, seed: u64) -> ModelInstance {
        let enc = EncoderKind::Trainable(TextEncoderSpec {
            embedding_dim: 8,
            ..Default::default()
        });
        ModelInstance::build(id, Some(enc), vocab, seed).unwrap()
    }

    fn input(ids: &[usize]) -> AttributionInput {
        AttributionInput {
            tokens: ids.iter().map(|i| format!("t{i}")).collect(),
            token_ids: ids.to_vec(),
            appraisals: None,
            emotions: None,
        }
    }

    #[test]
    fn linear_model_closed_form() {
        // Model 1 is affine in the token embeddings:
        // F = mean(x) P w_t + const, so dF/dx_{j,i} = (P w_t)_i / L.
        let m = model(1, 12, 4);
        let inp = input(&[2, 5, 5, 9]);
        let p = m.params.value("encoder.projection.weight").unwrap();
        let w = m.params.value("text_embedding->pcb_head.0.weight").unwrap();
        let table = m.params.value("encoder.embedding").unwrap();
        let (d, t, len) = (8, 2, 4.0);
        let pw: Vec<f64> = (0..d).map(|i| (0..d).map(|j| p.at2(i, j) * w.at2(j, t)).sum::<f64>() / len).collect();
        for steps in [1, 3, 128] {
            let r = integrated_gradients(&m, &inp, t, &IgConfig { steps, baseline: Baseline::Zero, chunk: 2 }).unwrap();
            for (pos, &id) in inp.token_ids.iter().enumerate() {
                let want: f64 = (0..d).map(|i| table.at2(id, i) * pw[i]).sum();
                assert!((r.scores[pos] - want).abs() < 1e-10, "steps {steps} pos {pos}");
            }
            assert!(r.completeness_gap < 1e-10);
        }
    }

    #[test]
    fn constant_function_scores_zero() {
        let mut m = model(11, 12, 4);
        for (path, p) in m.params.iter_mut() {
            if path.starts_with("fusion_concat->pcb_head.1.weight") {
                p.value.fill(0.0);
            }
        }
        let r = integrated_gradients(&m, &input(&[2, 3, 4]), 1, &IgConfig::default()).unwrap();
        assert!(r.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn baseline_token_scores_zero() {
        let m = model(12, 12, 4);
        let r = integrated_gradients(&m, &input(&[3, PAD_ID, 7]), 0, &IgConfig::default()).unwrap();
        assert_eq!(r.scores[1], 0.0);
        assert!(r.scores[0] != 0.0);
    }

    #[test]
    fn completeness_improves_with_steps() {
        let m = model(10, 20, 8);
        for ids in [vec![2, 3, 4, 5], vec![7, 7, 19, 11, 2], vec![13]] {
            let coarse = integrated_gradients(&m, &input(&ids), 2, &IgConfig { steps: 16, ..Default::default() }).unwrap();
            let fine = integrated_gradients(&m, &input(&ids), 2, &IgConfig { steps: 4096, chunk: 512, ..Default::default() }).unwrap();
            assert!(fine.completeness_gap <= coarse.completeness_gap, "{ids:?}");
            assert!(fine.relative_gap() < 1e-3);
        }
    }

    #[test]
    fn deterministic_and_chunk_independent() {
        let m = model(6, 12, 2);
        let a = integrated_gradients(&m, &input(&[2, 3, 4]), 1, &IgConfig::default()).unwrap();
        let b = integrated_gradients(&m, &input(&[2, 3, 4]), 1, &IgConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = integrated_gradients(&m, &input(&[2, 3, 4]), 1, &IgConfig { chunk: 7, ..Default::default() }).unwrap();
        for (x, y) in a.scores.iter().zip(&c.scores) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rating_only_model_is_capability_error() {
        let m = ModelInstance::build(2, None, 0, 1).unwrap();
        assert!(matches!(
            integrated_gradients(&m, &input(&[2]), 0, &IgConfig::default()),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn multi_modal_needs_its_ratings() {
        let m = model(7, 12, 1);
        let mut inp = input(&[2, 3]);
        assert!(matches!(
            integrated_gradients(&m, &inp, 0, &IgConfig::default()),
            Err(Error::MissingModality(_))
        ));
        inp.appraisals = Some(vec![0.5; 20]);
        let r = integrated_gradients(&m, &inp, 0, &IgConfig::default()).unwrap();
        assert_eq!(r.scores.len(), 2);
    }

    #[test]
    fn ranking() {
        let r = AttributionReport {
            record_id: None,
            tokens: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            scores: vec![0.5, -0.9, 0.1, -0.5],
            target_class: 0,
            predicted_class: 0,
            target_logit: 0.0,
            baseline_logit: 0.0,
            attribution_sum: 0.0,
            completeness_gap: 0.0,
            steps: 1,
            baseline: Baseline::Pad,
        };
        let pos = |k| rank_tokens(&r, k).iter().map(|t| t.position).collect::<Vec<_>>();
        assert_eq!(pos(2), vec![1, 0]);
        assert_eq!(pos(4), vec![1, 0, 3, 2]);
        assert_eq!(pos(10).len(), 4);
    }

    #[test]
    fn empty_text() {
        let m = model(1, 12, 1);
        let r = integrated_gradients(&m, &input(&[]), 0, &IgConfig::default()).unwrap();
        assert!(r.scores.is_empty());
        assert!(r.completeness_gap < 1e-12);
    }
}
