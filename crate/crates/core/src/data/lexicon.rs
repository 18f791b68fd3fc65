//! Deterministic keyword-lexicon sentiment proxy over 7 classes.

use crate::textmetric::split_tokens;
use serde::{Deserialize, Serialize};

/// Fixed class order; ties fall back to this order.
pub const SENTIMENT_CLASSES: [&str; 7] =
    ["anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentClass {
    Anger,
    Disgust,
    Fear,
    Joy,
    Neutral,
    Sadness,
    Surprise,
}

impl SentimentClass {
    pub fn index(&self) -> usize {
        match self {
            SentimentClass::Anger => 0,
            SentimentClass::Disgust => 1,
            SentimentClass::Fear => 2,
            SentimentClass::Joy => 3,
            SentimentClass::Neutral => 4,
            SentimentClass::Sadness => 5,
            SentimentClass::Surprise => 6,
        }
    }

    pub fn from_index(i: usize) -> SentimentClass {
        match i {
            0 => SentimentClass::Anger,
            1 => SentimentClass::Disgust,
            2 => SentimentClass::Fear,
            3 => SentimentClass::Joy,
            4 => SentimentClass::Neutral,
            5 => SentimentClass::Sadness,
            6 => SentimentClass::Surprise,
            _ => panic!("sentiment index {i} out of range"),
        }
    }

    pub fn name(&self) -> &'static str {
        SENTIMENT_CLASSES[self.index()]
    }

    pub fn parse(name: &str) -> Option<SentimentClass> {
        SENTIMENT_CLASSES.iter().position(|c| *c == name).map(SentimentClass::from_index)
    }

    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; 7];
        v[self.index()] = 1.0;
        v
    }
}

/// Keyword lists per class. The joy and sadness entries cover the cue
/// words that mark positive and negative descriptions in this corpus.
pub const LEXICON: [(&str, SentimentClass); 42] = [
    ("stormy", SentimentClass::Anger),
    ("furious", SentimentClass::Anger),
    ("fierce", SentimentClass::Anger),
    ("violent", SentimentClass::Anger),
    ("harsh", SentimentClass::Disgust),
    ("grating", SentimentClass::Disgust),
    ("coarse", SentimentClass::Disgust),
    ("ominous", SentimentClass::Fear),
    ("uneasy", SentimentClass::Fear),
    ("trembling", SentimentClass::Fear),
    ("shadowy", SentimentClass::Fear),
    ("anxious", SentimentClass::Fear),
    ("bright", SentimentClass::Joy),
    ("lively", SentimentClass::Joy),
    ("sweetly", SentimentClass::Joy),
    ("joyous", SentimentClass::Joy),
    ("cheerful", SentimentClass::Joy),
    ("radiant", SentimentClass::Joy),
    ("peaceful", SentimentClass::Joy),
    ("beautiful", SentimentClass::Joy),
    ("exuberant", SentimentClass::Joy),
    ("tender", SentimentClass::Joy),
    ("calm", SentimentClass::Neutral),
    ("steady", SentimentClass::Neutral),
    ("measured", SentimentClass::Neutral),
    ("plain", SentimentClass::Neutral),
    ("austere", SentimentClass::Neutral),
    ("sadness", SentimentClass::Sadness),
    ("loss", SentimentClass::Sadness),
    ("lament", SentimentClass::Sadness),
    ("mournful", SentimentClass::Sadness),
    ("elegiac", SentimentClass::Sadness),
    ("somber", SentimentClass::Sadness),
    ("grieving", SentimentClass::Sadness),
    ("wistful", SentimentClass::Sadness),
    ("sudden", SentimentClass::Surprise),
    ("unexpected", SentimentClass::Surprise),
    ("startling", SentimentClass::Surprise),
    ("abrupt", SentimentClass::Surprise),
    ("jolting", SentimentClass::Surprise),
    ("dark", SentimentClass::Fear),
    ("gloomy", SentimentClass::Sadness),
];

/// Vote over keyword hits: the winning class has the most distinct
/// keywords matched, then the most total occurrences, then the earliest
/// position in the fixed class order. No keyword at all → neutral.
pub fn lexicon_sentiment(text: &str) -> SentimentClass {
    let tokens = split_tokens(text);
    let mut distinct = [0usize; 7];
    let mut total = [0usize; 7];
    for (word, class) in LEXICON {
        let hits = tokens.iter().filter(|t| t.as_str() == word).count();
        if hits > 0 {
            distinct[class.index()] += 1;
            total[class.index()] += hits;
        }
    }
    if total.iter().all(|&t| t == 0) {
        return SentimentClass::Neutral;
    }
    let mut best = 0usize;
    for c in 1..7 {
        if distinct[c] > distinct[best] || (distinct[c] == distinct[best] && total[c] > total[best])
        {
            best = c;
        }
    }
    SentimentClass::from_index(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_cue_words_vote_joy() {
        assert_eq!(lexicon_sentiment("peaceful and beautiful melody"), SentimentClass::Joy);
    }

    #[test]
    fn negative_cue_words_vote_sadness() {
        assert_eq!(lexicon_sentiment("sadness and loss pervade"), SentimentClass::Sadness);
    }

    #[test]
    fn no_keywords_defaults_to_neutral() {
        assert_eq!(lexicon_sentiment("the movement begins"), SentimentClass::Neutral);
    }

    #[test]
    fn distinct_keywords_beat_repetition() {
        // two distinct joy words vs one sadness word repeated twice
        assert_eq!(
            lexicon_sentiment("bright and lively, with sadness, more sadness"),
            SentimentClass::Joy
        );
    }

    #[test]
    fn tie_falls_back_to_class_order() {
        // one fear word, one joy word, single occurrence each → fear wins
        // (earlier in the fixed order).
        assert_eq!(lexicon_sentiment("ominous yet bright"), SentimentClass::Fear);
    }

    #[test]
    fn one_hot_is_a_unit_vector() {
        let v = SentimentClass::Sadness.one_hot();
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        assert_eq!(v[5], 1.0);
    }
}
