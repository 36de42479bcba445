use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear decay from `base_lr` to zero over `total_steps`, no warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub base_lr: f64,
    pub total_steps: usize,
    pub current_step: usize,
}

impl LinearSchedule {
    pub fn new(base_lr: f64, total_steps: usize) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::Config("linear schedule needs total_steps > 0".into()));
        }
        Ok(Self {
            base_lr,
            total_steps,
            current_step: 0,
        })
    }

    /// `base_lr * (1 - step / total_steps)`, clamped at zero.
    pub fn lr(&self) -> Result<f64> {
        if self.total_steps == 0 {
            return Err(Error::Config("linear schedule needs total_steps > 0".into()));
        }
        let frac = self.current_step as f64 / self.total_steps as f64;
        Ok((self.base_lr * (1.0 - frac)).max(0.0))
    }

    pub fn advance(&mut self) {
        self.current_step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(step: usize) -> f64 {
        LinearSchedule {
            base_lr: 1e-5,
            total_steps: 100,
            current_step: step,
        }
        .lr()
        .unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(at(0), 1e-5);
        assert!((at(50) - 5e-6).abs() < 1e-20);
        assert_eq!(at(100), 0.0);
        assert_eq!(at(150), 0.0);
    }

    #[test]
    fn non_increasing() {
        let mut s = LinearSchedule::new(3e-4, 37).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..=37 {
            let lr = s.lr().unwrap();
            assert!(lr <= prev);
            prev = lr;
            s.advance();
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn zero_total_is_config_error() {
        assert!(matches!(LinearSchedule::new(1e-5, 0), Err(Error::Config(_))));
        let s = LinearSchedule { base_lr: 1e-5, total_steps: 0, current_step: 0 };
        assert!(s.lr().is_err());
    }
}
