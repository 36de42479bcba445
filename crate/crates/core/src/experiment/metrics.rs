use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(predictions: &[usize], labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Size("cannot score an empty split".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(())
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check(predictions, labels)?;
    let errors = predictions.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(1.0 - errors as f64 / labels.len() as f64)
}

/// `m[label][prediction]` counts.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    check(predictions, labels)?;
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(Error::Label(format!("class {} outside [0, {classes})", p.max(l))));
        }
        m[l][p] += 1;
    }
    Ok(m)
}

/// Support-weighted mean of per-class F1; a class with zero precision and
/// recall scores 0.
pub fn f1_weighted(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    let m = confusion_matrix(predictions, labels, classes)?;
    let n = labels.len() as f64;
    let mut total = 0.0;
    for c in 0..classes {
        let support: usize = m[c].iter().sum();
        if support == 0 {
            continue;
        }
        let tp = m[c][c] as f64;
        let predicted: usize = m.iter().map(|row| row[c]).sum();
        // F1 = 2 tp / (2 tp + fp + fn), which is 0 whenever tp is 0.
        let f1 = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (predicted as f64 + support as f64)
        };
        total += support as f64 / n * f1;
    }
    Ok(total)
}

/// Accuracy of always predicting the most frequent label.
pub fn majority_accuracy(labels: &[usize], classes: usize) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Size("cannot score an empty split".into()));
    }
    let mut counts = vec![0usize; classes];
    for &l in labels {
        *counts.get_mut(l).ok_or_else(|| Error::Label(format!("class {l} outside [0, {classes})")))? += 1;
    }
    Ok(*counts.iter().max().expect("classes > 0") as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub confusion: Vec<Vec<usize>>,
    pub count: usize,
}

impl Evaluation {
    pub fn score(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(predictions, labels)?,
            f1_weighted: f1_weighted(predictions, labels, classes)?,
            confusion: confusion_matrix(predictions, labels, classes)?,
            count: labels.len(),
        })
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
