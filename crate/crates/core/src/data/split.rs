use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::record::{PcbTarget, ReviewRecord};
use crate::data::segment::segment_pcb;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle, then contiguous train / validation / test blocks.
/// Validation and test sizes are floored; the remainder goes to train.
pub fn split(record_count: usize, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    let parts = [ratios.train, ratios.validation, ratios.test];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {parts:?} must be in [0, 1] and sum to 1"
        )));
    }
    if record_count < 3 {
        return Err(Error::Size(format!(
            "need at least 3 records to split, got {record_count}"
        )));
    }
    let n_val = (record_count as f64 * ratios.validation).floor() as usize;
    let n_test = (record_count as f64 * ratios.test).floor() as usize;
    let n_train = record_count - n_val - n_test;

    let mut order: Vec<usize> = (0..record_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(DatasetSplit {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
        seed,
    })
}

/// Low / moderate / high counts of `target` over `indices`.
pub fn class_distribution(records: &[ReviewRecord], indices: &[usize], target: PcbTarget) -> Result<[usize; 3]> {
    let mut counts = [0; 3];
    for &i in indices {
        counts[segment_pcb(records[i].pcb(target))?.index()] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(s: &DatasetSplit) -> (usize, usize, usize) {
        (s.train.len(), s.validation.len(), s.test.len())
    }

    #[test]
    fn full_scale_sizes() {
        assert_eq!(sizes(&split(1400, SplitRatios::default(), 1).unwrap()), (1120, 140, 140));
        assert_eq!(sizes(&split(10, SplitRatios::default(), 1).unwrap()), (8, 1, 1));
    }

    #[test]
    fn deterministic() {
        assert_eq!(split(57, SplitRatios::default(), 5).unwrap(), split(57, SplitRatios::default(), 5).unwrap());
        assert_ne!(split(57, SplitRatios::default(), 5).unwrap(), split(57, SplitRatios::default(), 6).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(split(2, SplitRatios::default(), 0), Err(Error::Size(_))));
        let bad = SplitRatios { train: 0.5, validation: 0.1, test: 0.1 };
        assert!(matches!(split(10, bad, 0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn disjoint_and_covering(n in 3usize..3000, seed in any::<u64>()) {
            let s = split(n, SplitRatios::default(), seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.validation.len(), n / 10);
        }
    }
}
