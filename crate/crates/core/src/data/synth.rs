//! Planted-signal generator following the appraisal -> emotion -> behavior chain.
//!
//! Appraisals are drawn uniformly from `1..=7`. Each emotion latent is a
//! weighted sum of centred appraisals, normalized, perturbed with Gaussian
//! noise, squashed by a logistic and mapped affinely onto `[1, 7]` with
//! round-half-up. Each PCB latent is the same construction over centred
//! appraisals *and* the discretized emotions. Text is rendered from templates
//! that insert lexicon words for high/low appraisals and for present emotions,
//! padded with neutral filler sentences up to a sampled length.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::stable_sigmoid;
use crate::data::record::{ReviewRecord, APPRAISAL_COUNT, EMOTION_COUNT};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Weights of one PCB latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentWeights {
    pub appraisals: Vec<f64>,
    pub emotions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcbWeights {
    pub repurchase: LatentWeights,
    pub promote: LatentWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Per appraisal dimension, words cueing a high rating.
    pub appraisal_high: Vec<Vec<String>>,
    /// Per appraisal dimension, words cueing a low rating.
    pub appraisal_low: Vec<Vec<String>>,
    /// Per emotion, words cueing its presence.
    pub emotions: Vec<Vec<String>>,
    /// Sentence frames containing one `{}` slot for a cue word.
    pub templates: Vec<String>,
    /// Neutral sentences used to reach the target length.
    pub filler: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub record_count: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian noise added to every normalized latent.
    pub noise_scale: f64,
    /// `[20][8]` appraisal-to-emotion weights.
    pub appraisal_emotion_weights: Vec<Vec<f64>>,
    pub pcb_weights: PcbWeights,
    /// Logistic slope applied to normalized emotion latents.
    pub emotion_gain: f64,
    /// Logistic slope applied to normalized PCB latents.
    pub pcb_gain: f64,
    /// Probability that a high/low appraisal is voiced in the text.
    pub appraisal_cue_rate: f64,
    pub lexicon: Lexicon,
    /// Target mean review length in tokens.
    pub mean_review_length: usize,
}

const EMOTION_VALENCE: [f64; EMOTION_COUNT] = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0];
// Sign of each appraisal's high pole; accountability-other (blaming others) is negative.
const APPRAISAL_VALENCE: [f64; APPRAISAL_COUNT] = [
    1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
];

const APPRAISAL_CUES: [([&str; 2], [&str; 2]); APPRAISAL_COUNT] = [
    (["unexpected", "novel"], ["familiar", "predictable"]),
    (["pleasant", "enjoyable"], ["unpleasant", "dreadful"]),
    (["helpful", "convenient"], ["obstructive", "inconvenient"]),
    (["fair", "honest"], ["unfair", "unjust"]),
    (["culpable", "blameworthy"], ["blameless", "faultless"]),
    (["important", "significant"], ["trivial", "negligible"]),
    (["consistent", "dependable"], ["inconsistent", "erratic"]),
    (["certain", "clear"], ["uncertain", "confusing"]),
    (["manageable", "controllable"], ["chaotic", "uncontrollable"]),
    (["effortless", "easy"], ["arduous", "exhausting"]),
    (["safe", "secure"], ["risky", "dangerous"]),
    (["commendable", "admirable"], ["shameful", "disgraceful"]),
    (["attentive", "considerate"], ["neglectful", "inattentive"]),
    (["affordable", "worthwhile"], ["overpriced", "wasteful"]),
    (["spacious", "comfortable"], ["cramped", "uncomfortable"]),
    (["punctual", "prompt"], ["late", "delayed"]),
    (["clean", "spotless"], ["dirty", "filthy"]),
    (["modern", "updated"], ["outdated", "worn"]),
    (["friendly", "welcoming"], ["rude", "hostile"]),
    (["quiet", "peaceful"], ["noisy", "loud"]),
];

const EMOTION_CUES: [[&str; 2]; EMOTION_COUNT] = [
    ["angry", "furious"],
    ["disappointed", "disappointing"],
    ["disgusted", "revolting"],
    ["grateful", "thankful"],
    ["joyful", "enjoyment"],
    ["proud", "triumphant"],
    ["regretful", "regret"],
    ["surprised", "astonished"],
];

const TEMPLATES: [&str; 6] = [
    "Overall the experience felt {}.",
    "Honestly it was {} from start to finish.",
    "I would describe the whole thing as {}.",
    "Looking back, it seemed {} to me.",
    "My partner agreed that it was {}.",
    "Every part of it felt {}.",
];

const FILLER: [&str; 24] = [
    "We booked the room about two weeks before the trip.",
    "The drive there took a little over three hours.",
    "Our flight landed in the early afternoon on a Friday.",
    "We checked in at the front desk and went up to the room.",
    "The building is close to the main street and a few shops.",
    "I travel for work several times a year.",
    "This time I brought my family along with me.",
    "We stayed for four nights in total.",
    "Breakfast was served on the ground floor every morning.",
    "There is a parking lot behind the main building.",
    "The room had a desk, a television and two beds.",
    "We spent most of the days walking around the city.",
    "On the second day we visited the museum downtown.",
    "The staff gave us a map of the area.",
    "We ordered dinner from a place nearby one evening.",
    "I paid with my credit card when we left.",
    "The checkout time was eleven in the morning.",
    "My sister had stayed there the year before.",
    "We took a taxi back to the airport on Monday.",
    "The window looked out over the street.",
    "I wrote this review a few days after we got home.",
    "There was a small pool on the roof of the building.",
    "We asked for extra towels on the third night.",
    "The elevator was next to the lobby.",
];

/// Deterministic pseudo-random magnitude in `[lo, hi)` for default weights.
fn magnitude(i: usize, j: usize, salt: u64, lo: f64, hi: f64) -> f64 {
    let mut x = (i as u64) << 32 ^ (j as u64) << 8 ^ salt;
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    lo + (hi - lo) * (x >> 11) as f64 / (1u64 << 53) as f64
}

impl Lexicon {
    pub fn default_lexicon() -> Self {
        let owned = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        Self {
            appraisal_high: APPRAISAL_CUES.iter().map(|(h, _)| owned(h)).collect(),
            appraisal_low: APPRAISAL_CUES.iter().map(|(_, l)| owned(l)).collect(),
            emotions: EMOTION_CUES.iter().map(|w| owned(w)).collect(),
            templates: owned(&TEMPLATES),
            filler: owned(&FILLER),
        }
    }
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        // Sign-consistent weights: w[i][j] * emotion_weight[j] always has the
        // sign of the appraisal's valence, so raising a positively weighted
        // appraisal cannot lower a PCB through the emotion path.
        let appraisal_emotion_weights = (0..APPRAISAL_COUNT)
            .map(|i| {
                (0..EMOTION_COUNT)
                    .map(|j| APPRAISAL_VALENCE[i] * EMOTION_VALENCE[j] * magnitude(i, j, 1, 0.1, 1.0))
                    .collect()
            })
            .collect();
        let latent = |salt| LatentWeights {
            appraisals: (0..APPRAISAL_COUNT)
                .map(|i| APPRAISAL_VALENCE[i] * magnitude(i, 0, salt, 0.2, 1.0))
                .collect(),
            emotions: (0..EMOTION_COUNT)
                .map(|j| EMOTION_VALENCE[j] * magnitude(j, 1, salt, 0.5, 1.5))
                .collect(),
        };
        Self {
            record_count: 1400,
            seed: 42,
            noise_scale: 0.3,
            appraisal_emotion_weights,
            pcb_weights: PcbWeights {
                repurchase: latent(2),
                promote: latent(3),
            },
            emotion_gain: 1.5,
            pcb_gain: 2.0,
            appraisal_cue_rate: 1.0,
            lexicon: Lexicon::default_lexicon(),
            mean_review_length: 190,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.record_count == 0 {
            return err("record_count must be positive".into());
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return err(format!("noise_scale {} must be finite and >= 0", self.noise_scale));
        }
        if !(0.0..=1.0).contains(&self.appraisal_cue_rate) {
            return err(format!("appraisal_cue_rate {} outside [0, 1]", self.appraisal_cue_rate));
        }
        if !self.emotion_gain.is_finite() || !self.pcb_gain.is_finite() {
            return err("gains must be finite".into());
        }
        let w = &self.appraisal_emotion_weights;
        if w.len() != APPRAISAL_COUNT || w.iter().any(|r| r.len() != EMOTION_COUNT) {
            return err(format!(
                "appraisal_emotion_weights must be {APPRAISAL_COUNT}x{EMOTION_COUNT}"
            ));
        }
        if w.iter().flatten().any(|x| !x.is_finite()) {
            return err("appraisal_emotion_weights must be finite".into());
        }
        for (name, lw) in [
            ("repurchase", &self.pcb_weights.repurchase),
            ("promote", &self.pcb_weights.promote),
        ] {
            if lw.appraisals.len() != APPRAISAL_COUNT || lw.emotions.len() != EMOTION_COUNT {
                return err(format!("{name} weights need 20 appraisal and 8 emotion entries"));
            }
            if lw.appraisals.iter().chain(&lw.emotions).any(|x| !x.is_finite()) {
                return err(format!("{name} weights must be finite"));
            }
        }
        let lex = &self.lexicon;
        let lists = [
            ("appraisal_high", &lex.appraisal_high, APPRAISAL_COUNT),
            ("appraisal_low", &lex.appraisal_low, APPRAISAL_COUNT),
            ("emotions", &lex.emotions, EMOTION_COUNT),
        ];
        for (name, list, n) in lists {
            if list.len() != n {
                return err(format!("lexicon.{name} needs {n} word lists, got {}", list.len()));
            }
            if let Some(i) = list.iter().position(|ws| ws.is_empty() || ws.iter().any(|w| tokenize(w).len() != 1)) {
                return err(format!("lexicon.{name}[{i}] must hold at least one single-token word"));
            }
        }
        if lex.filler.is_empty() || lex.filler.iter().any(|s| tokenize(s).is_empty()) {
            return err("lexicon.filler must hold non-empty sentences".into());
        }
        if lex.templates.is_empty() || lex.templates.iter().any(|t| t.matches("{}").count() != 1) {
            return err("lexicon.templates must each contain exactly one `{}` slot".into());
        }
        if self.mean_review_length == 0 {
            return err("mean_review_length must be positive".into());
        }
        Ok(())
    }
}

/// Centres a 1..=7 rating onto `[-1, 1]`.
pub fn centre(rating: u8) -> f64 {
    (f64::from(rating) - 4.0) / 3.0
}

/// Logistic squash then affine map onto `[1, 7]` with round-half-up.
pub fn discretize(latent: f64, gain: f64) -> u8 {
    let x = 1.0 + 6.0 * stable_sigmoid(gain * latent);
    ((x + 0.5).floor() as u8).clamp(1, 7)
}

// Variance of a centred uniform 1..=7 rating.
const CENTRED_VARIANCE: f64 = 4.0 / 9.0;

fn norm(weights: impl Iterator<Item = f64>) -> f64 {
    let s = (CENTRED_VARIANCE * weights.map(|w| w * w).sum::<f64>()).sqrt();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Noise-free part of the generative model, exposed for oracles.
pub struct PlantedModel<'a> {
    cfg: &'a SyntheticConfig,
}

impl<'a> PlantedModel<'a> {
    pub fn new(cfg: &'a SyntheticConfig) -> Self {
        Self { cfg }
    }

    pub fn emotion_latent(&self, appraisals: &[u8; APPRAISAL_COUNT], emotion: usize) -> f64 {
        let w = &self.cfg.appraisal_emotion_weights;
        let raw: f64 = (0..APPRAISAL_COUNT).map(|i| w[i][emotion] * centre(appraisals[i])).sum();
        raw / norm((0..APPRAISAL_COUNT).map(|i| w[i][emotion]))
    }

    pub fn pcb_latent(
        &self,
        weights: &LatentWeights,
        appraisals: &[u8; APPRAISAL_COUNT],
        emotions: &[u8; EMOTION_COUNT],
    ) -> f64 {
        let raw: f64 = weights.appraisals.iter().zip(appraisals).map(|(w, &a)| w * centre(a)).sum::<f64>()
            + weights.emotions.iter().zip(emotions).map(|(w, &e)| w * centre(e)).sum::<f64>();
        raw / norm(weights.appraisals.iter().chain(&weights.emotions).copied())
    }

    /// Emotions, repurchase and promote ratings at zero noise.
    pub fn ratings(&self, appraisals: &[u8; APPRAISAL_COUNT]) -> ([u8; EMOTION_COUNT], u8, u8) {
        let mut emotions = [0u8; EMOTION_COUNT];
        for (j, e) in emotions.iter_mut().enumerate() {
            *e = discretize(self.emotion_latent(appraisals, j), self.cfg.emotion_gain);
        }
        let pw = &self.cfg.pcb_weights;
        let rep = discretize(self.pcb_latent(&pw.repurchase, appraisals, &emotions), self.cfg.pcb_gain);
        let pro = discretize(self.pcb_latent(&pw.promote, appraisals, &emotions), self.cfg.pcb_gain);
        (emotions, rep, pro)
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<ReviewRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let planted = PlantedModel::new(cfg);
    let width = cfg.record_count.to_string().len().max(4);
    let mut out = Vec::with_capacity(cfg.record_count);
    for n in 0..cfg.record_count {
        let mut appraisals = [0u8; APPRAISAL_COUNT];
        for a in &mut appraisals {
            *a = rng.random_range(1..=7);
        }
        let mut noise = || -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.noise_scale * z
        };
        let mut emotions = [0u8; EMOTION_COUNT];
        for (j, e) in emotions.iter_mut().enumerate() {
            *e = discretize(planted.emotion_latent(&appraisals, j) + noise(), cfg.emotion_gain);
        }
        let pw = &cfg.pcb_weights;
        let pcb_repurchase = discretize(
            planted.pcb_latent(&pw.repurchase, &appraisals, &emotions) + noise(),
            cfg.pcb_gain,
        );
        let pcb_promote = discretize(
            planted.pcb_latent(&pw.promote, &appraisals, &emotions) + noise(),
            cfg.pcb_gain,
        );
        let text = render_text(cfg, &appraisals, &emotions, &mut rng);
        out.push(ReviewRecord {
            id: format!("syn-{n:0width$}"),
            text,
            appraisals,
            emotions,
            pcb_repurchase,
            pcb_promote,
        });
    }
    Ok(out)
}

fn cue_sentence(lex: &Lexicon, word: &str, rng: &mut impl Rng) -> String {
    let template = lex.templates.choose(rng).expect("validated non-empty");
    template.replacen("{}", word, 1)
}

fn render_text(
    cfg: &SyntheticConfig,
    appraisals: &[u8; APPRAISAL_COUNT],
    emotions: &[u8; EMOTION_COUNT],
    rng: &mut impl Rng,
) -> String {
    let lex = &cfg.lexicon;
    let mut cues = Vec::new();
    for (i, &a) in appraisals.iter().enumerate() {
        let voiced = rng.random_bool(cfg.appraisal_cue_rate);
        let words = match a {
            1..=2 => &lex.appraisal_low[i],
            6..=7 => &lex.appraisal_high[i],
            _ => continue,
        };
        if voiced {
            let w = words.choose(rng).expect("validated non-empty");
            cues.push(cue_sentence(lex, w, rng));
        }
    }
    for (j, &e) in emotions.iter().enumerate() {
        if e >= 5 {
            let w = lex.emotions[j].choose(rng).expect("validated non-empty");
            cues.push(cue_sentence(lex, w, rng));
        }
    }

    let mean = cfg.mean_review_length as f64;
    let target = rng.random_range((0.75 * mean).round() as usize..=(1.25 * mean).round() as usize);
    let mut length: usize = cues.iter().map(|s| tokenize(s).len()).sum();
    let mut filler = Vec::new();
    while length < target {
        let s = lex.filler.choose(rng).expect("validated non-empty");
        length += tokenize(s).len();
        filler.push(s.clone());
    }
    // Interleave cue sentences at random positions among the filler.
    let mut sentences = filler;
    for cue in cues {
        let pos = rng.random_range(0..=sentences.len());
        sentences.insert(pos, cue);
    }
    sentences.join(" ")
}
