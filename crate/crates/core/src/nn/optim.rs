use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-5)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Updates every trainable parameter from its gradient, then clears the
    /// gradients. Every trainable parameter must carry a gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if let Some((path, _)) = store.iter().find(|(_, p)| p.trainable && p.grad.is_none()) {
            return Err(Error::Optimizer {
                path: path.clone(),
                reason: "has no gradient".into(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (path, p) in store.iter_mut() {
            if !p.trainable {
                continue;
            }
            let grad = p.grad.take().expect("checked above");
            let n = grad.numel();
            let (m, v) = self
                .moments
                .entry(path.clone())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            if m.len() != n {
                return Err(Error::Optimizer {
                    path: path.clone(),
                    reason: format!("changed size from {} to {n}", m.len()),
                });
            }
            for (((w, g), m), v) in p.value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
