//! Tempo-marking normalization and the two tag-based heuristic baselines.

use crate::data::{PairedSample, TagSet, Tempo};
use crate::error::{Error, Result};
use crate::textmetric::{split_tokens, tokenize, BleuConfig, Vocabulary};
use std::collections::BTreeMap;

/// Marking table mapping title tokens to the four tempo categories.
pub const TEMPO_MARKINGS: [(&str, Tempo); 12] = [
    ("grave", Tempo::Slow),
    ("largo", Tempo::Slow),
    ("lento", Tempo::Slow),
    ("adagio", Tempo::Slow),
    ("andante", Tempo::Medium),
    ("moderato", Tempo::Medium),
    ("andantino", Tempo::Medium),
    ("allegro", Tempo::Fast),
    ("allegretto", Tempo::Fast),
    ("vivace", Tempo::Fast),
    ("presto", Tempo::SuperFast),
    ("prestissimo", Tempo::SuperFast),
];

/// Scan the title tokens case-insensitively against the marking table;
/// the first matching token in title order wins. `None` when no marking
/// is present.
pub fn tempo_category(title: &str) -> Option<Tempo> {
    for token in split_tokens(title) {
        for (marking, tempo) in TEMPO_MARKINGS {
            if token == marking {
                return Some(tempo);
            }
        }
    }
    None
}

/// Text of the corpus sample sharing the most tag fields with the query;
/// ties break toward the lowest sample id.
pub fn tags_knn<'a>(query: &TagSet, corpus: &'a [PairedSample]) -> Result<&'a str> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("tags_knn over empty corpus".into()));
    }
    let mut best: Option<&PairedSample> = None;
    let mut best_overlap = 0usize;
    for s in corpus {
        let overlap = query.overlap(&s.tags);
        let better = match best {
            None => true,
            Some(b) => overlap > best_overlap || (overlap == best_overlap && s.id < b.id),
        };
        if better {
            best = Some(s);
            best_overlap = overlap;
        }
    }
    Ok(&best.expect("corpus non-empty").text)
}

/// For every exact tag combination in the corpus, the member text with
/// the highest mean BLEU against the rest of its group (self excluded).
/// Singleton groups return their only text; ties break toward the lowest
/// sample id.
pub fn tags_representative(
    corpus: &[PairedSample],
    cfg: &BleuConfig,
) -> BTreeMap<TagSet, String> {
    let mut groups: BTreeMap<TagSet, Vec<&PairedSample>> = BTreeMap::new();
    for s in corpus {
        groups.entry(s.tags).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (tags, mut members) in groups {
        members.sort_by(|a, b| a.id.cmp(&b.id));
        if members.len() == 1 {
            out.insert(tags, members[0].text.clone());
            continue;
        }
        let texts: Vec<&str> = members.iter().map(|m| m.text.as_str()).collect();
        let vocab = Vocabulary::build(&texts);
        let tokenized: Vec<_> = texts.iter().map(|t| tokenize(t, &vocab)).collect();
        let mut best_idx = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..members.len() {
            let mut sum = 0.0;
            for j in 0..members.len() {
                if i != j {
                    sum += crate::textmetric::bleu(&tokenized[i], &tokenized[j], cfg);
                }
            }
            let mean = sum / (members.len() - 1) as f64;
            if mean > best_score {
                best_score = mean;
                best_idx = i;
            }
        }
        out.insert(tags, members[best_idx].text.clone());
    }
    out
}
