use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const APPRAISAL_COUNT: usize = 20;
pub const EMOTION_COUNT: usize = 8;
pub const EMOTION_NAMES: [&str; EMOTION_COUNT] = [
    "anger",
    "disappointment",
    "disgust",
    "gratitude",
    "joy",
    "pride",
    "regret",
    "surprise",
];

/// One review with its Likert ratings (all in `1..=7`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub text: String,
    pub appraisals: [u8; APPRAISAL_COUNT],
    pub emotions: [u8; EMOTION_COUNT],
    pub pcb_repurchase: u8,
    pub pcb_promote: u8,
}

impl ReviewRecord {
    pub fn validate(&self) -> Result<()> {
        let check = |what: &str, v: u8| {
            if (1..=7).contains(&v) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{what} rating {v} outside [1, 7]")))
            }
        };
        for (i, &a) in self.appraisals.iter().enumerate() {
            check(&format!("appraisal {}", i + 1), a)?;
        }
        for (name, &e) in EMOTION_NAMES.iter().zip(&self.emotions) {
            check(name, e)?;
        }
        check("pcb_repurchase", self.pcb_repurchase)?;
        check("pcb_promote", self.pcb_promote)
    }

    pub fn pcb(&self, target: PcbTarget) -> u8 {
        match target {
            PcbTarget::Repurchase => self.pcb_repurchase,
            PcbTarget::Promote => self.pcb_promote,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcbTarget {
    Repurchase,
    Promote,
}

impl PcbTarget {
    pub const ALL: [PcbTarget; 2] = [PcbTarget::Repurchase, PcbTarget::Promote];

    pub fn as_str(self) -> &'static str {
        match self {
            PcbTarget::Repurchase => "repurchase",
            PcbTarget::Promote => "promote",
        }
    }
}

impl std::str::FromStr for PcbTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repurchase" => Ok(PcbTarget::Repurchase),
            "promote" => Ok(PcbTarget::Promote),
            other => Err(Error::Config(format!("unknown PCB target `{other}`"))),
        }
    }
}

impl std::fmt::Display for PcbTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five dimensions named in prose, then numbered placeholders.
pub fn default_appraisal_names() -> Vec<String> {
    let named = [
        "novelty",
        "pleasantness",
        "goal_conduciveness",
        "fairness",
        "accountability_other",
    ];
    named
        .iter()
        .map(|s| s.to_string())
        .chain((named.len() + 1..=APPRAISAL_COUNT).map(|i| format!("appraisal_{i:02}")))
        .collect()
}

/// Parses the sidecar name file: exactly 20 non-empty lines.
pub fn parse_appraisal_names(s: &str) -> Result<Vec<String>> {
    let names: Vec<String> = s.lines().map(|l| l.trim().to_string()).collect();
    if names.len() != APPRAISAL_COUNT || names.iter().any(String::is_empty) {
        return Err(Error::Validation(format!(
            "appraisal name file needs exactly {APPRAISAL_COUNT} non-empty lines, got {}",
            names.len()
        )));
    }
    Ok(names)
}

pub fn format_appraisal_names(names: &[String]) -> String {
    let mut s = names.join("\n");
    s.push('\n');
    s
}
