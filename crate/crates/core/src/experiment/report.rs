//! Metrics CSV and the grouped results table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PcbTarget;
use crate::error::{Error, Result};
use crate::experiment::metrics::mean_std;
use crate::experiment::MetricsSummary;
use crate::zoo::{ArchitectureSpec, Family};

pub const METRICS_FILE: &str = "metrics.csv";

/// One line of a metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub architecture_id: u8,
    pub family: String,
    pub pcb_target: PcbTarget,
    pub repetition: usize,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub seed: u64,
}

pub fn rows(summary: &MetricsSummary) -> Vec<MetricsRow> {
    summary
        .runs
        .iter()
        .map(|r| MetricsRow {
            architecture_id: summary.architecture_id,
            family: summary.family.as_str().to_string(),
            pcb_target: summary.pcb_target,
            repetition: r.repetition,
            accuracy: r.accuracy,
            f1_weighted: r.f1_weighted,
            seed: r.seed,
        })
        .collect()
}

pub fn to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Serde(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "architecture_id",
            "family",
            "pcb_target",
            "repetition",
            "accuracy",
            "f1_weighted",
            "seed",
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

pub fn parse_csv(content: &str) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(content.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Serde(format!("metrics CSV: {e}"))))
        .collect()
}

/// Every `metrics.csv` below `dir`, in path order.
pub fn find_metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == METRICS_FILE) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_metrics_dir(dir: &Path) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for f in find_metrics_files(dir)? {
        rows.extend(parse_csv(&crate::io::read_to_string(&f)?)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

/// Aggregates rows per (architecture, target). Duplicate repetitions keep
/// the last row read.
pub fn aggregate(rows: &[MetricsRow]) -> BTreeMap<(u8, PcbTarget), Cell> {
    let mut groups: BTreeMap<(u8, PcbTarget), BTreeMap<usize, &MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.architecture_id, r.pcb_target)).or_default().insert(r.repetition, r);
    }
    groups
        .into_iter()
        .map(|(k, reps)| {
            let acc: Vec<f64> = reps.values().map(|r| r.accuracy).collect();
            let f1: Vec<f64> = reps.values().map(|r| r.f1_weighted).collect();
            let (am, asd) = mean_std(&acc);
            let (fm, fsd) = mean_std(&f1);
            (
                k,
                Cell {
                    runs: acc.len(),
                    accuracy_mean: am,
                    accuracy_std: asd,
                    f1_mean: fm,
                    f1_std: fsd,
                },
            )
        })
        .collect()
}

/// Missing (architecture, target) pairs and repetitions among the
/// architectures that have any rows.
pub fn gaps(rows: &[MetricsRow]) -> Vec<String> {
    let mut reps: BTreeMap<(u8, PcbTarget), BTreeSet<usize>> = BTreeMap::new();
    for r in rows {
        reps.entry((r.architecture_id, r.pcb_target)).or_default().insert(r.repetition);
    }
    let archs: BTreeSet<u8> = reps.keys().map(|k| k.0).collect();
    let targets_seen: BTreeSet<PcbTarget> = reps.keys().map(|k| k.1).collect();
    let mut out = Vec::new();
    for &a in &archs {
        for t in PcbTarget::ALL {
            match reps.get(&(a, t)) {
                None if targets_seen.contains(&t) => out.push(format!("architecture {a}, {t}: no runs")),
                None => {}
                Some(set) => {
                    let max = *set.iter().max().expect("non-empty");
                    let missing: Vec<String> = (0..max).filter(|i| !set.contains(i)).map(|i| i.to_string()).collect();
                    if !missing.is_empty() {
                        out.push(format!("architecture {a}, {t}: missing repetitions {}", missing.join(", ")));
                    }
                }
            }
        }
    }
    out
}

fn fmt_cell(cell: Option<&Cell>) -> (String, String) {
    match cell {
        Some(c) => (
            format!("{:.1} ({:.2})", 100.0 * c.accuracy_mean, 100.0 * c.accuracy_std),
            format!("{:.2} ({:.2})", c.f1_mean, c.f1_std),
        ),
        None => ("-".into(), "-".into()),
    }
}

/// Aligned text table grouped by family, with `mean (std)` cells: accuracy
/// in percent, weighted F1 as a fraction. Standard deviations are population.
pub fn render_table(rows: &[MetricsRow]) -> String {
    if rows.is_empty() {
        return "no results\n".to_string();
    }
    let cells = aggregate(rows);
    let targets: Vec<PcbTarget> = PcbTarget::ALL
        .into_iter()
        .filter(|t| cells.keys().any(|k| k.1 == *t))
        .collect();
    let archs: BTreeSet<u8> = cells.keys().map(|k| k.0).collect();

    let mut header = vec!["Model".to_string()];
    for t in &targets {
        header.push(format!("{t} accuracy"));
        header.push(format!("{t} F1"));
    }
    enum Line {
        Group(&'static str),
        Row(Vec<String>),
    }
    let mut lines = Vec::new();
    for fam in Family::ALL {
        let members: Vec<(u8, ArchitectureSpec)> = archs
            .iter()
            .filter_map(|&a| ArchitectureSpec::for_id(a, 1).ok().map(|s| (a, s)))
            .filter(|(_, s)| s.family == fam)
            .collect();
        if members.is_empty() {
            continue;
        }
        lines.push(Line::Group(fam.title()));
        for (a, spec) in members {
            let mut row = vec![format!("({a}) {}", spec.name)];
            for &t in &targets {
                let (acc, f1) = fmt_cell(cells.get(&(a, t)));
                row.push(acc);
                row.push(f1);
            }
            lines.push(Line::Row(row));
        }
    }
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for l in &lines {
        if let Line::Row(r) = l {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
    }
    let fmt_row = |r: &[String]| -> String {
        let mut s = String::new();
        for (i, (c, w)) in r.iter().zip(&widths).enumerate() {
            if i == 0 {
                s.push_str(&format!("{c:<w$}"));
            } else {
                s.push_str(&format!("  {c:>w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let rule = "-".repeat(total) + "\n";
    let mut out = fmt_row(&header);
    out.push_str(&rule);
    for l in &lines {
        match l {
            Line::Group(g) => out.push_str(&format!("{g}\n")),
            Line::Row(r) => out.push_str(&fmt_row(r)),
        }
    }
    out.push_str(&rule);
    let runs: BTreeSet<usize> = cells.values().map(|c| c.runs).collect();
    let runs: Vec<String> = runs.iter().map(usize::to_string).collect();
    out.push_str(&format!(
        "mean (population std) over {} run(s); accuracy in %, F1 weighted\n",
        runs.join("/")
    ));
    let g = gaps(rows);
    if !g.is_empty() {
        out.push_str("gaps:\n");
        for line in g {
            out.push_str(&format!("  {line}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: u8, t: PcbTarget, rep: usize, acc: f64) -> MetricsRow {
        MetricsRow {
            architecture_id: a,
            family: ArchitectureSpec::for_id(a, 1).unwrap().family.as_str().into(),
            pcb_target: t,
            repetition: rep,
            accuracy: acc,
            f1_weighted: acc - 0.1,
            seed: 42 + rep as u64,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(1, PcbTarget::Promote, 0, 0.123456789012345), row(12, PcbTarget::Repurchase, 1, 0.5)];
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with("architecture_id,family,pcb_target,repetition,accuracy,f1_weighted,seed\n"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn empty_table() {
        assert_eq!(render_table(&[]), "no results\n");
    }

    #[test]
    fn one_row_table() {
        let t = render_table(&[row(2, PcbTarget::Promote, 0, 0.75)]);
        assert!(t.contains("Baseline"));
        assert!(t.contains("(2) Appraisals -> PCB"));
        assert!(t.contains("75.0 (0.00)"));
        assert!(t.contains("0.65 (0.00)"));
        assert!(!t.contains("gaps"));
        assert_eq!(t.lines().filter(|l| l.starts_with('(')).count(), 1);
    }

    #[test]
    fn full_sweep_has_all_groups_and_gaps_are_listed() {
        let mut rows = Vec::new();
        for a in 1..=12 {
            for t in PcbTarget::ALL {
                rows.push(row(a, t, 0, 0.6));
            }
        }
        let t = render_table(&rows);
        for g in ["Baseline", "Constrained", "Multi-modal", "Multi-task", "Theoretical model"] {
            assert!(t.lines().any(|l| l == g), "missing group {g}");
        }
        rows.retain(|r| !(r.architecture_id == 5 && r.pcb_target == PcbTarget::Promote));
        rows.push(row(3, PcbTarget::Promote, 2, 0.6));
        let t = render_table(&rows);
        assert!(t.contains("architecture 5, promote: no runs"));
        assert!(t.contains("architecture 3, promote: missing repetitions 1"));
    }
}
