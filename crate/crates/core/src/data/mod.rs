//! Paired-sample data model, synthetic corpus generation, dataset I/O,
//! tag heuristics, fold splitting, and the lexicon sentiment proxy.

mod folds;
mod io;
mod lexicon;
mod synth;
mod tags;

pub use folds::{kfold_split, FoldSplit};
pub use io::{load_dataset, save_dataset};
pub use lexicon::{lexicon_sentiment, SentimentClass, SENTIMENT_CLASSES};
pub use synth::{synth_generate, synth_generate_default, verify_corpus_stats, CorpusStats, SynthConfig};
pub use tags::{tags_knn, tags_representative, tempo_category};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    String,
    Wind,
    Piano,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tempo {
    Slow,
    Medium,
    Fast,
    SuperFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Sonate,
    Trio,
    Quartet,
    QuintetOrMore,
}

/// The four tag categories every sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagSet {
    pub mode: Mode,
    pub instrument: Instrument,
    pub tempo: Tempo,
    pub ensemble: Ensemble,
}

impl TagSet {
    /// Number of equal tag fields between two tag sets (0..=4).
    pub fn overlap(&self, other: &TagSet) -> usize {
        (self.mode == other.mode) as usize
            + (self.instrument == other.instrument) as usize
            + (self.tempo == other.tempo) as usize
            + (self.ensemble == other.ensemble) as usize
    }
}

/// One aligned ⟨features, text⟩ pair with tags and a sentiment label.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub id: String,
    pub features: Matrix,
    pub text: String,
    pub tags: TagSet,
    pub sentiment: SentimentClass,
}

impl PairedSample {
    pub fn validate(&self) -> Result<()> {
        if self.features.numel() == 0 {
            return Err(Error::InvalidInput(format!("sample {}: empty features", self.id)));
        }
        if self.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!("sample {}: blank text", self.id)));
        }
        self.features.check_finite("features")?;
        Ok(())
    }

    /// One-hot distribution over the 7 sentiment classes.
    pub fn sentiment_distribution(&self) -> Vec<f64> {
        self.sentiment.one_hot()
    }
}
