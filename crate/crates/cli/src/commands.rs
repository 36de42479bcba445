use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pcb_core::attribution::{
    attribute_many, class_logits, ensure_attributable, rank_tokens, render_html, AttributionInput, Baseline, IgConfig,
};
use pcb_core::autodiff::stable_sigmoid;
use pcb_core::data::{
    default_appraisal_names, export, format_appraisal_names, generate_synthetic, ingest, parse_appraisal_names,
    segment_pcb, DataFormat, PcbTarget, ReviewRecord, SyntheticConfig,
};
use pcb_core::experiment::report::{read_metrics_dir, render_table, rows, to_csv, MetricsRow, METRICS_FILE};
use pcb_core::experiment::{apply_override, run_repetitions, ExperimentConfig};
use pcb_core::io::{read_to_string, write_atomic};
use pcb_core::text::PrecomputedEmbeddings;
use pcb_core::zoo::ARCHITECTURE_IDS;
use pcb_core::{Error, Result};

use crate::args::{AttributeArgs, BaselineArg, ReportArgs, SynthArgs, TargetArg, TrainArgs};
use crate::artifacts::{Checkpoint, RunManifest, TrainConfig};
use crate::default_output_root;

const CLASS_NAMES: [&str; 3] = ["low", "moderate", "high"];

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

/// `data.jsonl` -> `data.names.txt`.
pub fn names_sidecar(dataset: &Path) -> PathBuf {
    dataset.with_extension("names.txt")
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg: SyntheticConfig = match &args.config {
        Some(p) => serde_json::from_str(&read_to_string(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => SyntheticConfig::default(),
    };
    for o in &args.overrides {
        apply_override(&mut cfg, o)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| default_output_root().join("synthetic.jsonl"));
    let format = DataFormat::from_path(&path)?;
    let records = generate_synthetic(&cfg)?;
    write_atomic(&path, export(&records, format)?.as_bytes())?;
    let names = names_sidecar(&path);
    write_atomic(&names, format_appraisal_names(&default_appraisal_names()).as_bytes())?;
    say(
        out,
        &format!("wrote {} records to {} (names: {})\n", records.len(), path.display(), names.display()),
    )
}

fn run_dir_name(cfg: &ExperimentConfig) -> String {
    format!("arch{:02}-{}", cfg.architecture, cfg.pcb_target)
}

struct TrainedRun {
    rows: Vec<MetricsRow>,
    seeds: Vec<u64>,
}

fn train_one(
    cfg: &ExperimentConfig,
    records: &[ReviewRecord],
    precomputed: Option<&PrecomputedEmbeddings>,
    args: &TrainArgs,
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<TrainedRun> {
    let outcome = run_repetitions(cfg, records, precomputed, args.workers)?;
    let metrics_rows = rows(&outcome.summary);
    let metrics_path = dir.join(METRICS_FILE);
    write_atomic(&metrics_path, to_csv(&metrics_rows)?.as_bytes())?;
    let summary_path = dir.join("summary.json");
    write_atomic(&summary_path, serde_json::to_string_pretty(&outcome.summary)?.as_bytes())?;
    let diag_path = dir.join("diagnostics.json");
    write_atomic(&diag_path, serde_json::to_string(&outcome.runs)?.as_bytes())?;
    manifest.artifacts.extend([metrics_path, summary_path, diag_path]);
    if !args.no_checkpoints {
        for run in &outcome.runs {
            let model = run.model.clone().expect("trained runs carry their model");
            let vocab = model.encoder.as_ref().and_then(|_| run.vocab.clone());
            let path = dir.join("checkpoints").join(format!("rep{}.json", run.repetition));
            Checkpoint::new(model, vocab, cfg.pcb_target, run.repetition, run.seed).save(&path)?;
            manifest.artifacts.push(path);
        }
    }
    let seeds: Vec<u64> = outcome.runs.iter().map(|r| r.seed).collect();
    manifest.seeds.extend(&seeds);
    Ok(TrainedRun {
        rows: metrics_rows,
        seeds,
    })
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let mut tc = TrainConfig::load(&args.config)?;
    for o in &args.overrides {
        apply_override(&mut tc, o)?;
    }
    if let Some(seed) = args.seed {
        tc.experiment.base_seed = seed;
    }
    if args.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    tc.experiment.validate()?;
    let records = ingest(&tc.dataset, None)?;
    let sidecar = names_sidecar(&tc.dataset);
    if sidecar.exists() {
        parse_appraisal_names(&read_to_string(&sidecar)?)?;
    }
    let precomputed = tc
        .precomputed_embeddings
        .as_deref()
        .map(PrecomputedEmbeddings::load)
        .transpose()?;

    let root = args.out.clone().unwrap_or_else(default_output_root);
    let configs: Vec<ExperimentConfig> = if args.sweep {
        ARCHITECTURE_IDS
            .flat_map(|a| {
                let base = tc.experiment.clone();
                PcbTarget::ALL.into_iter().map(move |t| ExperimentConfig {
                    architecture: a,
                    pcb_target: t,
                    ..base.clone()
                })
            })
            .collect()
    } else {
        vec![tc.experiment.clone()]
    };

    let mut all_rows = Vec::new();
    let mut sweep_manifest = RunManifest::new("train --sweep", serde_json::to_value(&tc)?);
    for cfg in &configs {
        let run_started = Instant::now();
        let dir = root.join(run_dir_name(cfg));
        let snapshot = TrainConfig {
            experiment: cfg.clone(),
            ..tc.clone()
        };
        let mut manifest = RunManifest::new("train", serde_json::to_value(&snapshot)?);
        let trained = train_one(cfg, &records, precomputed.as_ref(), args, &dir, &mut manifest)?;
        manifest.duration_seconds = run_started.elapsed().as_secs_f64();
        let manifest_path = dir.join("manifest.json");
        manifest.save(&manifest_path)?;
        sweep_manifest.artifacts.extend(manifest.artifacts);
        sweep_manifest.artifacts.push(manifest_path);
        sweep_manifest.seeds.extend(trained.seeds);
        say(
            out,
            &format!(
                "architecture {} ({}): {} run(s) -> {}\n",
                cfg.architecture,
                cfg.pcb_target,
                trained.rows.len(),
                dir.display()
            ),
        )?;
        all_rows.extend(trained.rows);
    }
    let table = render_table(&all_rows);
    if args.sweep {
        let report = root.join("report.txt");
        write_atomic(&report, table.as_bytes())?;
        sweep_manifest.artifacts.push(report);
        sweep_manifest.seeds.sort_unstable();
        sweep_manifest.seeds.dedup();
        sweep_manifest.duration_seconds = started.elapsed().as_secs_f64();
        sweep_manifest.save(&root.join("manifest.json"))?;
    }
    say(out, &table)
}

pub fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let dir = args.dir.clone().unwrap_or_else(default_output_root);
    let rows = if dir.exists() { read_metrics_dir(&dir)? } else { Vec::new() };
    let table = render_table(&rows);
    if let Some(path) = &args.out {
        write_atomic(path, table.as_bytes())?;
    }
    say(out, &table)
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// High-class probability under a softmax over the three PCB logits.
fn high_probability(logits: &[f64; 3]) -> f64 {
    // softmax_2 = sigmoid(l2 - logsumexp(l0, l1))
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    stable_sigmoid(logits[2] - lse)
}

pub fn attribute(args: &AttributeArgs, out: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let ck = Checkpoint::load(&args.checkpoint)?;
    ensure_attributable(&ck.model)?;
    let vocab = ck
        .vocab
        .as_ref()
        .ok_or_else(|| Error::Capability("checkpoint carries no vocabulary".into()))?;
    let records = ingest(&args.dataset, None)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let mut chosen: Vec<&ReviewRecord> = Vec::new();
    let mut seen = HashSet::new();
    for id in &args.ids {
        let r = records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| Error::Lookup(format!("record id `{id}` not in {}", args.dataset.display())))?;
        if seen.insert(r.id.clone()) {
            chosen.push(r);
        }
    }
    if let Some(n) = args.extremes {
        let scored: Vec<(f64, &ReviewRecord)> = pool.install(|| {
            use rayon::prelude::*;
            records
                .par_iter()
                .map(|r| {
                    let input = AttributionInput::from_record(r, vocab, &ck.model);
                    class_logits(&ck.model, &input).map(|l| (high_probability(&l), r))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
        let picks = order.iter().take(n).chain(order.iter().rev().take(n));
        for &i in picks {
            if seen.insert(scored[i].1.id.clone()) {
                chosen.push(scored[i].1);
            }
        }
    }
    if chosen.is_empty() {
        return Err(Error::Config("no records selected; pass --id or --extremes".into()));
    }

    let cfg = IgConfig {
        steps: args.steps,
        baseline: match args.baseline {
            BaselineArg::Pad => Baseline::Pad,
            BaselineArg::Zero => Baseline::Zero,
        },
        ..IgConfig::default()
    };
    let mut jobs = Vec::with_capacity(chosen.len());
    for r in &chosen {
        let input = AttributionInput::from_record(r, vocab, &ck.model);
        let target = match args.target {
            TargetArg::Gold => segment_pcb(r.pcb(ck.pcb_target))?.index(),
            TargetArg::Predicted => pcb_core::attribution::predict_class(&ck.model, &input)?,
        };
        jobs.push((input, target));
    }
    let mut reports = pool.install(|| attribute_many(&ck.model, &jobs, &cfg))?;

    let dir = args.out.clone().unwrap_or_else(|| default_output_root().join("attributions"));
    let mut manifest = RunManifest::new(
        "attribute",
        serde_json::json!({
            "checkpoint": args.checkpoint,
            "dataset": args.dataset,
            "ids": chosen.iter().map(|r| &r.id).collect::<Vec<_>>(),
            "target": format!("{:?}", args.target).to_lowercase(),
            "ig": cfg,
        }),
    );
    manifest.seeds.push(ck.seed);
    for (r, rep) in chosen.iter().zip(reports.iter_mut()) {
        rep.record_id = Some(r.id.clone());
        let stem = file_stem_for(&r.id);
        let json_path = dir.join(format!("{stem}.json"));
        let html_path = dir.join(format!("{stem}.html"));
        write_atomic(&json_path, serde_json::to_string_pretty(&rep)?.as_bytes())?;
        write_atomic(&html_path, render_html(std::slice::from_ref(rep), &CLASS_NAMES).as_bytes())?;
        manifest.artifacts.extend([json_path, html_path]);

        let top: Vec<String> = rank_tokens(rep, args.top_k)
            .iter()
            .map(|t| format!("{}({:+.3})", t.token, t.score))
            .collect();
        say(
            out,
            &format!(
                "{}: target {} predicted {} gap {:.2e} top: {}\n",
                r.id,
                CLASS_NAMES[rep.target_class],
                CLASS_NAMES[rep.predicted_class],
                rep.completeness_gap,
                top.join(" ")
            ),
        )?;
    }
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_probability_matches_softmax() {
        let l = [0.3, -1.2, 2.0];
        let z: f64 = l.iter().map(|v: &f64| v.exp()).sum();
        assert!((high_probability(&l) - l[2].exp() / z).abs() < 1e-15);
    }

    #[test]
    fn sidecar_and_stems() {
        assert_eq!(names_sidecar(Path::new("d/data.jsonl")), PathBuf::from("d/data.names.txt"));
        assert_eq!(file_stem_for("syn-0001"), "syn-0001");
        assert_eq!(file_stem_for("a/b c"), "a_b_c");
    }
}
