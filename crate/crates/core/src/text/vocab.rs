use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "[pad]";
pub const UNK_TOKEN: &str = "[unk]";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token/id mapping. Ids 0 and 1 are the pad and unknown tokens; the rest are
/// sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from tokenized training texts, keeping tokens seen at least
    /// `min_frequency` times.
    pub fn build<'a, I, T>(texts: I, min_frequency: usize) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a String>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for text in texts {
            for tok in text {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let words = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_frequency && t != PAD_TOKEN && t != UNK_TOKEN)
            .map(|(t, _)| t.to_string());
        Self::from_tokens(words)
    }

    fn from_tokens(words: impl Iterator<Item = String>) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(words);
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unknown tokens map to [`UNK_ID`].
    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line; the line number is the id.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_file_string(s: &str) -> Result<Self> {
        let lines: Vec<String> = s.lines().map(str::to_string).collect();
        Self::try_from(lines)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(lines: Vec<String>) -> Result<Self> {
        if lines.len() < 2 || lines[PAD_ID] != PAD_TOKEN || lines[UNK_ID] != UNK_TOKEN {
            return Err(Error::Vocabulary(format!(
                "vocabulary must start with `{PAD_TOKEN}` and `{UNK_TOKEN}`"
            )));
        }
        let words = &lines[2..];
        if let Some(w) = words.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Vocabulary(format!(
                "vocabulary not strictly sorted at `{}` / `{}`",
                w[0], w[1]
            )));
        }
        if let Some(w) = words.iter().find(|w| w.is_empty() || w.as_str() == PAD_TOKEN || w.as_str() == UNK_TOKEN) {
            return Err(Error::Vocabulary(format!("invalid vocabulary entry `{w}`")));
        }
        Ok(Self::from_tokens(words.iter().cloned()))
    }
}
