//! Deterministic stand-in scorer: a logistic model over four surface
//! features of the newest comment in the prefix.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ForecastError, ScoreError, Scorer};
use crate::ids::short_hash;
use crate::parser::{CommentRecord, ConversationRecord};

pub const BUNDLED_LEXICON: &str = include_str!("../../lexicon/hostility-v1.txt");

/// Lexicon hits and exclamation marks saturate at this count.
pub const FEATURE_CAP: u32 = 5;

const SECOND_PERSON: [&str; 5] = ["you", "your", "yours", "you're", "youre"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub version: String,
    /// First 8 hex digits of SHA-256 over the file bytes.
    pub hash: String,
    words: HashSet<String>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Self {
        let mut version = String::from("0");
        let mut words = HashSet::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if !line.is_empty() {
                words.insert(line.to_lowercase());
            }
        }
        Lexicon { version, hash: short_hash(text.as_bytes()), words }
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub f_second_person: f64,
    pub f_lexicon_hits: u32,
    pub f_exclamations: u32,
    pub f_caps_ratio: f64,
}

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector {
        f_second_person: 0.0,
        f_lexicon_hits: 0,
        f_exclamations: 0,
        f_caps_ratio: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.f_second_person)
            && (0.0..=1.0).contains(&self.f_caps_ratio)
            && self.f_lexicon_hits <= FEATURE_CAP
            && self.f_exclamations <= FEATURE_CAP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineWeights {
    pub bias: f64,
    pub second_person: f64,
    pub lexicon_hits: f64,
    pub exclamations: f64,
    pub caps_ratio: f64,
}

impl Default for BaselineWeights {
    fn default() -> Self {
        BaselineWeights {
            bias: -2.0,
            second_person: 3.0,
            lexicon_hits: 1.5,
            exclamations: 0.5,
            caps_ratio: 2.0,
        }
    }
}

impl BaselineWeights {
    /// Feature weights must be finite and non-negative so the score is
    /// monotone in every feature.
    pub fn validate(&self) -> Result<(), ForecastError> {
        let feature = [self.second_person, self.lexicon_hits, self.exclamations, self.caps_ratio];
        if !self.bias.is_finite() || feature.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ForecastError::Config(
                "baseline feature weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Tokens are maximal runs of alphanumerics and apostrophes, with quote
/// apostrophes at either end trimmed off.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’'))
        .map(|t| t.replace('’', "'"))
        .map(|t| t.trim_matches('\'').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Features of the comment at position `k` (1-based) of the conversation.
pub fn extract_features(
    conversation: &ConversationRecord,
    k: usize,
    lexicon: &Lexicon,
) -> Result<FeatureVector, ForecastError> {
    let comment = k
        .checked_sub(1)
        .and_then(|i| conversation.comments.get(i))
        .ok_or_else(|| ForecastError::Usage(format!(
            "prefix length {k} outside 1..={}",
            conversation.comments.len()
        )))?;
    Ok(comment_features(&comment.text, lexicon))
}

pub fn comment_features(text: &str, lexicon: &Lexicon) -> FeatureVector {
    let tokens = tokenize(text);
    let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let second = lowered.iter().filter(|t| SECOND_PERSON.contains(&t.as_str())).count();
    let hits = lowered.iter().filter(|t| lexicon.contains(t)).count();
    let bangs = text.chars().filter(|&c| c == '!').count();

    let alphabetic: Vec<&String> = tokens
        .iter()
        .filter(|t| t.chars().all(|c| c.is_alphabetic() || c == '\''))
        .filter(|t| t.chars().filter(|c| c.is_alphabetic()).count() >= 2)
        .collect();
    let shouted = alphabetic
        .iter()
        .filter(|t| t.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase))
        .count();

    FeatureVector {
        f_second_person: second as f64 / tokens.len().max(1) as f64,
        f_lexicon_hits: (hits as u32).min(FEATURE_CAP),
        f_exclamations: (bangs.min(FEATURE_CAP as usize)) as u32,
        f_caps_ratio: shouted as f64 / alphabetic.len().max(1) as f64,
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn baseline_score(features: &FeatureVector, weights: &BaselineWeights) -> f64 {
    logistic(
        weights.bias
            + weights.second_person * features.f_second_person
            + weights.lexicon_hits * f64::from(features.f_lexicon_hits)
            + weights.exclamations * f64::from(features.f_exclamations)
            + weights.caps_ratio * features.f_caps_ratio,
    )
}

#[derive(Debug, Clone)]
pub struct BaselineScorer {
    id: String,
    weights: BaselineWeights,
    lexicon: Lexicon,
}

impl BaselineScorer {
    pub fn new(weights: BaselineWeights, lexicon: Lexicon) -> Result<Self, ForecastError> {
        weights.validate()?;
        let mut id = format!("baseline-v1:lex{}-{}", lexicon.version, lexicon.hash);
        if weights != BaselineWeights::default() {
            let encoded = serde_json::to_string(&weights).expect("weights serialize");
            id.push_str(&format!(":w{}", short_hash(encoded.as_bytes())));
        }
        Ok(BaselineScorer { id, weights, lexicon })
    }

    pub fn bundled() -> Self {
        Self::new(BaselineWeights::default(), Lexicon::bundled()).expect("default weights are valid")
    }

    pub fn weights(&self) -> &BaselineWeights {
        &self.weights
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Scorer for BaselineScorer {
    fn scorer_id(&self) -> &str {
        &self.id
    }

    fn score(&self, _conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        let last = prefix.last().ok_or_else(|| ScoreError::Protocol("empty prefix".into()))?;
        Ok(baseline_score(&comment_features(&last.text, &self.lexicon), &self.weights))
    }
}
