use serde::{Deserialize, Serialize};

use crate::data::record::{PcbTarget, ReviewRecord, APPRAISAL_COUNT, EMOTION_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Low,
    Moderate,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Moderate, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

fn check(rating: u8) -> Result<()> {
    if (1..=7).contains(&rating) {
        Ok(())
    } else {
        Err(Error::Validation(format!("rating {rating} outside [1, 7]")))
    }
}

/// 1-2 low, 3-5 moderate, 6-7 high. Also used for appraisal ratings.
pub fn segment_pcb(rating: u8) -> Result<Level> {
    check(rating)?;
    Ok(match rating {
        1..=2 => Level::Low,
        3..=5 => Level::Moderate,
        _ => Level::High,
    })
}

/// 1-4 absent, 5-7 present.
pub fn segment_emotion(rating: u8) -> Result<u8> {
    check(rating)?;
    Ok(u8::from(rating >= 5))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedLabels {
    pub pcb_class: Level,
    pub emotion_flags: [u8; EMOTION_COUNT],
    pub appraisal_classes: [Level; APPRAISAL_COUNT],
}

impl SegmentedLabels {
    pub fn from_record(record: &ReviewRecord, target: PcbTarget) -> Result<Self> {
        let mut emotion_flags = [0; EMOTION_COUNT];
        for (f, &e) in emotion_flags.iter_mut().zip(&record.emotions) {
            *f = segment_emotion(e)?;
        }
        let mut appraisal_classes = [Level::Low; APPRAISAL_COUNT];
        for (c, &a) in appraisal_classes.iter_mut().zip(&record.appraisals) {
            *c = segment_pcb(a)?;
        }
        Ok(Self {
            pcb_class: segment_pcb(record.pcb(target))?,
            emotion_flags,
            appraisal_classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range() {
        assert!(segment_pcb(0).is_err());
        assert!(segment_pcb(8).is_err());
        assert!(segment_emotion(0).is_err());
        assert!(segment_emotion(9).is_err());
    }

    #[test]
    fn classes_partition_the_scale() {
        let mut seen = [0; 3];
        for r in 1..=7 {
            seen[segment_pcb(r).unwrap().index()] += 1;
        }
        assert_eq!(seen, [2, 3, 2]);
    }
}
