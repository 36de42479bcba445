use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::data::{split, DatasetSplit, PcbTarget, ReviewRecord, APPRAISAL_COUNT};
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::metrics::{majority_accuracy, mean_std, Evaluation};
use crate::nn::{AdamState, LinearSchedule};
use crate::text::{tokenize, EncodedBatch, EncoderKind, PrecomputedEmbeddings, TextEncoderSpec, TextInput, Vocabulary};
use crate::zoo::{Family, LossConfig, Modality, ModelBatch, ModelInstance, Targets, PCB_CLASSES};

/// Records with their split, training vocabulary and cached token ids.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub records: Vec<ReviewRecord>,
    pub split: DatasetSplit,
    pub vocab: Vocabulary,
    pub encoder: EncoderKind,
    pub precomputed: Option<PrecomputedEmbeddings>,
    token_ids: Vec<Vec<usize>>,
}

impl PreparedData {
    /// The vocabulary is built from the training split only.
    pub fn new(
        records: Vec<ReviewRecord>,
        split: DatasetSplit,
        encoder: &TextEncoderSpec,
        precomputed: Option<PrecomputedEmbeddings>,
    ) -> Result<Self> {
        let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text)).collect();
        let vocab = Vocabulary::build(split.train.iter().map(|&i| &tokens[i]), encoder.min_token_frequency);
        Self::with_vocab(records, split, vocab, encoder, precomputed)
    }

    pub fn with_vocab(
        records: Vec<ReviewRecord>,
        split: DatasetSplit,
        vocab: Vocabulary,
        encoder: &TextEncoderSpec,
        precomputed: Option<PrecomputedEmbeddings>,
    ) -> Result<Self> {
        let token_ids = records.iter().map(|r| vocab.encode(&tokenize(&r.text))).collect();
        let encoder = match &precomputed {
            Some(p) => EncoderKind::Precomputed { dim: p.dim },
            None => EncoderKind::Trainable(encoder.clone()),
        };
        Ok(Self {
            records,
            split,
            vocab,
            encoder,
            precomputed,
            token_ids,
        })
    }

    pub fn token_ids(&self, index: usize) -> &[usize] {
        &self.token_ids[index]
    }

    pub fn max_sequence_length(&self) -> usize {
        match &self.encoder {
            EncoderKind::Trainable(s) => s.max_sequence_length,
            EncoderKind::Precomputed { .. } => usize::MAX,
        }
    }

    pub fn text_input(&self, indices: &[usize]) -> Result<TextInput> {
        match &self.precomputed {
            Some(p) => {
                let ids: Vec<&str> = indices.iter().map(|&i| self.records[i].id.as_str()).collect();
                Ok(TextInput::Embeddings(p.batch(&ids)?))
            }
            None => {
                let seqs: Vec<Vec<usize>> = indices.iter().map(|&i| self.token_ids[i].clone()).collect();
                Ok(TextInput::Tokens(EncodedBatch::from_sequences(
                    &seqs,
                    self.max_sequence_length(),
                )?))
            }
        }
    }

    pub fn batch(&self, indices: &[usize], model: &ModelInstance) -> Result<ModelBatch> {
        let recs: Vec<&ReviewRecord> = indices.iter().map(|&i| &self.records[i]).collect();
        let (appr, emo) = ModelBatch::ratings(&recs)?;
        let spec = &model.spec;
        Ok(ModelBatch {
            text: if spec.has_input(Modality::Text) {
                Some(self.text_input(indices)?)
            } else {
                None
            },
            appraisals: spec.has_input(Modality::Appraisals).then_some(appr),
            emotions: spec.has_input(Modality::Emotions).then_some(emo),
        })
    }

    pub fn targets(&self, indices: &[usize], target: PcbTarget) -> Result<Targets> {
        let recs: Vec<&ReviewRecord> = indices.iter().map(|&i| &self.records[i]).collect();
        Targets::from_records(&recs, target)
    }

    pub fn labels(&self, indices: &[usize], target: PcbTarget) -> Result<Vec<usize>> {
        Ok(self.targets(indices, target)?.pcb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    /// `None` is full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub target: PcbTarget,
    pub loss: LossConfig,
    pub validation_points: usize,
}

impl TrainOptions {
    /// Budget for `architecture` under `cfg`: text readers use the text
    /// epochs, lr and batch size; rating-only models their own.
    pub fn for_model(cfg: &ExperimentConfig, model: &ModelInstance, seed: u64) -> Self {
        let text = model.spec.has_input(Modality::Text);
        Self {
            epochs: if text { cfg.text_epochs } else { cfg.rating_epochs },
            lr: if text { cfg.lr } else { cfg.rating_lr.unwrap_or(cfg.lr) },
            batch_size: if text { Some(cfg.text_batch_size) } else { cfg.rating_batch_size },
            seed,
            target: cfg.pcb_target,
            loss: cfg.loss.clone(),
            validation_points: cfg.validation_points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Total loss of every optimizer step.
    pub loss_trace: Vec<f64>,
    /// `(epoch, validation accuracy)` checkpoints.
    pub validation_curve: Vec<(usize, f64)>,
    pub steps: usize,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Minibatch Adam with a linear learning-rate decay over all steps.
pub fn train(model: &mut ModelInstance, data: &PreparedData, opts: &TrainOptions) -> Result<TrainReport> {
    let train_idx = &data.split.train;
    if train_idx.is_empty() {
        return Err(Error::Size("empty training split".into()));
    }
    if opts.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    let batch_size = opts.batch_size.unwrap_or(train_idx.len()).min(train_idx.len());
    let per_epoch = train_idx.len().div_ceil(batch_size);
    let mut schedule = LinearSchedule::new(opts.lr, opts.epochs * per_epoch)?;
    let mut adam = AdamState::new(opts.lr);
    let mut rng = seeded(opts.seed, 1);
    let mut order = train_idx.clone();
    let full = if per_epoch == 1 {
        Some((data.batch(&order, model)?, data.targets(&order, opts.target)?))
    } else {
        None
    };
    let checkpoints: Vec<usize> = (1..=opts.validation_points)
        .map(|k| (opts.epochs * k).div_ceil(opts.validation_points))
        .collect();
    let mut report = TrainReport::default();
    for epoch in 1..=opts.epochs {
        if full.is_none() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch_size) {
            let owned;
            let (batch, targets) = match &full {
                Some((b, t)) => (b, t),
                None => {
                    owned = (data.batch(chunk, model)?, data.targets(chunk, opts.target)?);
                    (&owned.0, &owned.1)
                }
            };
            let mut g = Graph::new();
            let out = model.forward(&mut g, batch)?;
            let loss = model.loss(&mut g, &out, targets, &opts.loss)?;
            let value = g.value(loss.total).item();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: report.steps,
                    param_norms: model.params.norms(),
                });
            }
            g.backward(loss.total)?;
            g.accumulate_param_grads(&mut model.params)?;
            adam.lr = schedule.lr()?;
            adam.step(&mut model.params)?;
            schedule.advance();
            report.loss_trace.push(value);
            report.steps += 1;
        }
        if checkpoints.contains(&epoch) && !data.split.validation.is_empty() {
            let ev = evaluate(model, data, &data.split.validation, opts.target)?;
            report.validation_curve.push((epoch, ev.accuracy));
        }
    }
    Ok(report)
}

/// Per-record model outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub pcb: Vec<usize>,
    /// Softmax probabilities, `[n][3]`.
    pub pcb_probs: Vec<[f64; PCB_CLASSES]>,
    /// `n * 20` predicted appraisal classes when the model has that head.
    pub appraisal_classes: Option<Vec<usize>>,
    /// `n * 8` predicted emotion flags when the model has that head.
    pub emotion_flags: Option<Vec<u8>>,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

const EVAL_CHUNK: usize = 256;

pub fn predict(model: &ModelInstance, data: &PreparedData, indices: &[usize]) -> Result<Predictions> {
    let mut out = Predictions {
        pcb: Vec::with_capacity(indices.len()),
        pcb_probs: Vec::with_capacity(indices.len()),
        appraisal_classes: model.spec.has_auxiliary(Modality::Appraisals).then(Vec::new),
        emotion_flags: model.spec.has_auxiliary(Modality::Emotions).then(Vec::new),
    };
    for chunk in indices.chunks(EVAL_CHUNK) {
        let mut g = Graph::new();
        let o = model.forward(&mut g, &data.batch(chunk, model)?)?;
        let z = g.value(o.pcb_logits);
        for i in 0..chunk.len() {
            let row = z.row(i);
            out.pcb.push(argmax(row));
            let lse = crate::autodiff::log_sum_exp(row);
            out.pcb_probs.push([(row[0] - lse).exp(), (row[1] - lse).exp(), (row[2] - lse).exp()]);
        }
        if let (Some(v), Some(a)) = (&mut out.appraisal_classes, o.appraisal_logits) {
            v.extend(g.value(a).data().chunks(3).map(argmax));
        }
        if let (Some(v), Some(e)) = (&mut out.emotion_flags, o.emotion_logits) {
            v.extend(g.value(e).data().iter().map(|&z| u8::from(z > 0.0)));
        }
    }
    Ok(out)
}

pub fn evaluate(model: &ModelInstance, data: &PreparedData, indices: &[usize], target: PcbTarget) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::Size("cannot evaluate on an empty split".into()));
    }
    let p = predict(model, data, indices)?;
    Evaluation::score(&p.pcb, &data.labels(indices, target)?, PCB_CLASSES)
}

/// Auxiliary-head accuracies, reported as diagnostics only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryMetrics {
    pub appraisal_accuracy: Option<f64>,
    pub emotion_accuracy: Option<f64>,
}

fn auxiliary_metrics(model: &ModelInstance, data: &PreparedData, indices: &[usize]) -> Result<AuxiliaryMetrics> {
    let p = predict(model, data, indices)?;
    let t = data.targets(indices, PcbTarget::Repurchase)?;
    let frac = |hits: usize, n: usize| hits as f64 / n as f64;
    Ok(AuxiliaryMetrics {
        appraisal_accuracy: p.appraisal_classes.map(|a| {
            let hits = a.iter().zip(&t.appraisal_classes).filter(|(x, y)| x == y).count();
            frac(hits, indices.len() * APPRAISAL_COUNT)
        }),
        emotion_accuracy: p.emotion_flags.map(|e| {
            let hits = e.iter().zip(t.emotion_flags.data()).filter(|(&x, &y)| f64::from(x) == y).count();
            frac(hits, t.emotion_flags.numel())
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRun {
    pub architecture: u8,
    pub seed: u64,
    pub train: TrainReport,
}

/// One trained repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub repetition: usize,
    pub seed: u64,
    pub test: Evaluation,
    pub train_accuracy: f64,
    pub majority_test_accuracy: f64,
    pub auxiliary: AuxiliaryMetrics,
    pub train: TrainReport,
    pub components: Vec<ComponentRun>,
    #[serde(skip)]
    pub model: Option<ModelInstance>,
    /// Vocabulary the model's token ids refer to (differs per run under resplit).
    #[serde(skip)]
    pub vocab: Option<Vocabulary>,
}

fn component_seed(seed: u64, architecture: u8) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(u64::from(architecture))
}

/// Builds and trains `cfg.architecture` with `seed`. Multi-modal models first
/// train their single-modality components, then freeze them and train the
/// fusion head.
pub fn train_architecture(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
) -> Result<(ModelInstance, TrainReport, Vec<ComponentRun>)> {
    let needs_encoder = |id: u8| -> Result<bool> {
        Ok(crate::zoo::ArchitectureSpec::for_id(id, data.encoder.output_dim())?.has_input(Modality::Text))
    };
    let build = |id: u8, s: u64| -> Result<ModelInstance> {
        let enc = needs_encoder(id)?.then(|| data.encoder.clone());
        ModelInstance::build(id, enc, data.vocab.len(), s)
    };
    let mut model = build(cfg.architecture, seed)?;
    let mut components = Vec::new();
    if model.spec.family == Family::MultiModal {
        for id in model.spec.components() {
            let s = component_seed(seed, id);
            let mut part = build(id, s)?;
            let opts = TrainOptions::for_model(cfg, &part, s);
            let report = train(&mut part, data, &opts)?;
            model.adopt_component(&part)?;
            components.push(ComponentRun {
                architecture: id,
                seed: s,
                train: report,
            });
        }
    }
    let opts = TrainOptions::for_model(cfg, &model, seed);
    let report = train(&mut model, data, &opts)?;
    Ok((model, report, components))
}

pub fn prepare(cfg: &ExperimentConfig, records: &[ReviewRecord], precomputed: Option<&PrecomputedEmbeddings>, split_seed: u64) -> Result<PreparedData> {
    let s = split(records.len(), cfg.split, split_seed)?;
    PreparedData::new(records.to_vec(), s, &cfg.encoder, precomputed.cloned())
}

pub fn run_single(cfg: &ExperimentConfig, data: &PreparedData, repetition: usize) -> Result<RunResult> {
    let seed = cfg.repetition_seed(repetition);
    let (model, train_report, components) = train_architecture(cfg, data, seed)?;
    let test = evaluate(&model, data, &data.split.test, cfg.pcb_target)?;
    let train_accuracy = evaluate(&model, data, &data.split.train, cfg.pcb_target)?.accuracy;
    let majority_test_accuracy = majority_accuracy(&data.labels(&data.split.test, cfg.pcb_target)?, PCB_CLASSES)?;
    let auxiliary = auxiliary_metrics(&model, data, &data.split.test)?;
    Ok(RunResult {
        repetition,
        seed,
        test,
        train_accuracy,
        majority_test_accuracy,
        auxiliary,
        train: train_report,
        components,
        model: Some(model),
        vocab: Some(data.vocab.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub f1_weighted: f64,
}

/// Test-split metrics across repetitions. Standard deviations are
/// population (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub architecture_id: u8,
    pub name: String,
    pub family: Family,
    pub pcb_target: PcbTarget,
    pub runs: Vec<RunMetrics>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub std_kind: String,
}

impl MetricsSummary {
    pub fn from_runs(cfg: &ExperimentConfig, runs: Vec<RunMetrics>) -> Result<Self> {
        let spec = crate::zoo::ArchitectureSpec::for_id(cfg.architecture, cfg.encoder.embedding_dim)?;
        let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let f1: Vec<f64> = runs.iter().map(|r| r.f1_weighted).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&acc);
        let (f1_mean, f1_std) = mean_std(&f1);
        Ok(Self {
            architecture_id: spec.id,
            name: spec.name,
            family: spec.family,
            pcb_target: cfg.pcb_target,
            runs,
            accuracy_mean,
            accuracy_std,
            f1_mean,
            f1_std,
            std_kind: "population".into(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: MetricsSummary,
    pub runs: Vec<RunResult>,
    /// Vocabulary and split of the first repetition.
    pub data: PreparedData,
}

/// Runs `cfg.repetitions` independent trainings with seeds `base_seed + i`,
/// at most `workers` at a time. The split is fixed by `base_seed` unless
/// `cfg.resplit` is set.
pub fn run_repetitions(
    cfg: &ExperimentConfig,
    records: &[ReviewRecord],
    precomputed: Option<&PrecomputedEmbeddings>,
    workers: usize,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let fixed = prepare(cfg, records, precomputed, cfg.base_seed)?;
    let job = |rep: usize| -> Result<RunResult> {
        if cfg.resplit && rep > 0 {
            let data = prepare(cfg, records, precomputed, cfg.repetition_seed(rep))?;
            run_single(cfg, &data, rep)
        } else {
            run_single(cfg, &fixed, rep)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(job)
            .collect::<Result<Vec<_>>>()
    })?;
    let metrics = runs
        .iter()
        .map(|r| RunMetrics {
            repetition: r.repetition,
            seed: r.seed,
            accuracy: r.test.accuracy,
            f1_weighted: r.test.f1_weighted,
        })
        .collect();
    Ok(ExperimentOutcome {
        summary: MetricsSummary::from_runs(cfg, metrics)?,
        runs,
        data: fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn small_cfg(arch: u8) -> ExperimentConfig {
        ExperimentConfig {
            architecture: arch,
            text_epochs: 2,
            rating_epochs: 20,
            lr: 1e-3,
            repetitions: 1,
            encoder: TextEncoderSpec {
                embedding_dim: 16,
                ..Default::default()
            },
            validation_points: 2,
            ..Default::default()
        }
    }

    fn records(n: usize) -> Vec<ReviewRecord> {
        generate_synthetic(&SyntheticConfig {
            record_count: n,
            noise_scale: 0.0,
            mean_review_length: 40,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_lr_leaves_params_bit_identical() {
        let recs = records(40);
        let mut cfg = small_cfg(1);
        cfg.lr = 0.0;
        let data = prepare(&cfg, &recs, None, 1).unwrap();
        let mut m = ModelInstance::build(1, Some(data.encoder.clone()), data.vocab.len(), 3).unwrap();
        let before = m.params.clone();
        let opts = TrainOptions::for_model(&cfg, &m, 3);
        train(&mut m, &data, &opts).unwrap();
        for ((k, a), (_, b)) in before.iter().zip(m.params.iter()) {
            assert!(
                a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()),
                "{k} moved"
            );
        }
    }

    #[test]
    fn deterministic_loss_traces() {
        let recs = records(40);
        for arch in [2u8, 12] {
            let cfg = small_cfg(arch);
            let data = prepare(&cfg, &recs, None, 1).unwrap();
            let a = train_architecture(&cfg, &data, 9).unwrap().1;
            let b = train_architecture(&cfg, &data, 9).unwrap().1;
            assert_eq!(a, b);
            assert!(!a.loss_trace.is_empty());
        }
    }

    #[test]
    fn multi_modal_trains_components() {
        let recs = records(40);
        let cfg = small_cfg(9);
        let data = prepare(&cfg, &recs, None, 1).unwrap();
        let (m, _, comps) = train_architecture(&cfg, &data, 1).unwrap();
        assert_eq!(comps.iter().map(|c| c.architecture).collect::<Vec<_>>(), vec![1, 2, 3]);
        let frozen = m.params.iter().filter(|(_, p)| !p.trainable).count();
        // encoder (3) + two trunks of two layers (8)
        assert_eq!(frozen, 11);
    }

    #[test]
    fn repetitions_and_workers_agree() {
        let recs = records(40);
        let mut cfg = small_cfg(2);
        cfg.repetitions = 3;
        let serial = run_repetitions(&cfg, &recs, None, 1).unwrap().summary;
        let parallel = run_repetitions(&cfg, &recs, None, 3).unwrap().summary;
        assert_eq!(serial, parallel);
        assert_eq!(serial.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![42, 43, 44]);
        cfg.repetitions = 1;
        let one = run_repetitions(&cfg, &recs, None, 1).unwrap().summary;
        assert_eq!((one.accuracy_std, one.f1_std), (0.0, 0.0));
    }

    #[test]
    fn rating_loss_moving_average_settles() {
        let recs = records(120);
        let mut cfg = small_cfg(2);
        cfg.rating_epochs = 400;
        cfg.lr = 1e-3;
        let data = prepare(&cfg, &recs, None, 1).unwrap();
        let trace = train_architecture(&cfg, &data, 5).unwrap().1.loss_trace;
        let ma: Vec<f64> = trace.windows(50).map(|w| w.iter().sum::<f64>() / 50.0).collect();
        let tail = &ma[ma.len() * 3 / 4..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0]), "moving average rose in the final quarter");
    }

    #[test]
    fn precomputed_encoder_trains() {
        let recs = records(30);
        let mut pre = PrecomputedEmbeddings { dim: 4, ..Default::default() };
        for (i, r) in recs.iter().enumerate() {
            pre.vectors.insert(r.id.clone(), vec![i as f64 / 30.0, 1.0, -0.5, 0.25]);
        }
        let cfg = small_cfg(11);
        let data = prepare(&cfg, &recs, Some(&pre), 1).unwrap();
        let (m, report, _) = train_architecture(&cfg, &data, 1).unwrap();
        assert!(report.loss_trace.iter().all(|l| l.is_finite()));
        assert!(m.params.get("encoder.embedding").is_err());
    }
}
