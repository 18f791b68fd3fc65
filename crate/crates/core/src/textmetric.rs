//! Tokenization and BLEU similarity.
//!
//! BLEU serves double duty here: corpus-level scoring of generated text
//! (reported ×100) and sentence-level similarity inside the group
//! topology loss (order 2 by default, configurable).

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const RESERVED: usize = 4;
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id bijection with fixed reserved ids 0..3 for PAD/BOS/EOS/UNK.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    /// Build from raw texts: tokens are collected, deduplicated and sorted
    /// so the vocabulary depends only on the token set.
    pub fn build(texts: &[&str]) -> Self {
        let mut uniq: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in texts {
            for tok in split_tokens(t) {
                if seen.insert(tok.clone()) {
                    uniq.push(tok);
                }
            }
        }
        uniq.sort();
        let mut v = Vocabulary::new();
        for tok in uniq {
            v.add(&tok);
        }
        v
    }

    pub fn add(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = (self.tokens.len() + RESERVED) as u32;
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn id_of(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        match id {
            PAD_ID => Some("<pad>"),
            BOS_ID => Some("<bos>"),
            EOS_ID => Some("<eos>"),
            UNK_ID => Some(UNK_TOKEN),
            _ => self.tokens.get(id as usize - RESERVED).map(|s| s.as_str()),
        }
    }

    /// Total id space including the four reserved ids.
    pub fn size(&self) -> usize {
        self.tokens.len() + RESERVED
    }

    /// One token per line; id = line number + 4.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in &self.tokens {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut v = Vocabulary::new();
        for line in f.lines() {
            let line = line?;
            if !line.is_empty() {
                v.add(&line);
            }
        }
        Ok(v)
    }
}

/// Tokenized text: `ids` always starts with BOS and ends with EOS; `raw`
/// holds the lowercase surface tokens (no specials).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub raw: Vec<String>,
}

impl TokenSequence {
    /// Content length (excluding BOS/EOS).
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn from_raw(raw: Vec<String>, vocab: &Vocabulary) -> Self {
        let mut ids = Vec::with_capacity(raw.len() + 2);
        ids.push(BOS_ID);
        ids.extend(raw.iter().map(|t| vocab.id_of(t)));
        ids.push(EOS_ID);
        TokenSequence { ids, raw }
    }
}

/// Lowercase and split on whitespace; punctuation characters become
/// single-character tokens.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Tokenize against a vocabulary; unknown tokens map to UNK.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> TokenSequence {
    TokenSequence::from_raw(split_tokens(text), vocab)
}

/// BLEU parameters. `epsilon` replaces zero clipped counts when
/// `smoothing` is set: p = (count + ε) / (total + ε).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: bool,
    pub epsilon: f64,
    /// Average the two argument orders (off by default; the loss reads
    /// BLEU(t_i, t_j) literally with t_i as hypothesis).
    pub symmetrize: bool,
}

impl BleuConfig {
    /// Corpus evaluation: order 4, smoothed.
    pub fn evaluation() -> Self {
        BleuConfig { max_n: 4, smoothing: true, epsilon: 0.1, symmetrize: false }
    }

    /// Similarity inside the topology loss: order 2, smoothed.
    pub fn topology() -> Self {
        BleuConfig { max_n: 2, smoothing: true, epsilon: 0.1, symmetrize: false }
    }

    /// Sentence score honoring the `symmetrize` flag.
    pub fn score(&self, hyp: &TokenSequence, reference: &TokenSequence) -> f64 {
        if self.symmetrize {
            0.5 * (bleu(hyp, reference, self) + bleu(reference, hyp, self))
        } else {
            bleu(hyp, reference, self)
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut map: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *map.entry(w).or_insert(0) += 1;
        }
    }
    map
}

/// Clipped matches and total hypothesis n-grams for one order.
fn clipped_counts(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let total: usize = hyp_counts.values().sum();
    let clipped: usize = hyp_counts
        .iter()
        .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped, total)
}

fn precision_log(clipped: usize, total: usize, cfg: &BleuConfig) -> Option<f64> {
    if clipped == 0 {
        if cfg.smoothing {
            Some(((clipped as f64 + cfg.epsilon) / (total as f64 + cfg.epsilon)).ln())
        } else {
            None
        }
    } else {
        Some(((clipped as f64) / (total as f64)).ln())
    }
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Sentence BLEU in [0, 1]: geometric mean of modified n-gram precisions
/// times the brevity penalty. Empty hypothesis or reference scores 0.
pub fn bleu(hyp: &TokenSequence, reference: &TokenSequence, cfg: &BleuConfig) -> f64 {
    assert!(cfg.max_n >= 1, "bleu requires max_n >= 1");
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=cfg.max_n {
        let (clipped, total) = clipped_counts(&hyp.raw, &reference.raw, n);
        match precision_log(clipped, total, cfg) {
            Some(lp) => log_sum += lp,
            None => return 0.0,
        }
    }
    brevity_penalty(hyp.len(), reference.len()) * (log_sum / cfg.max_n as f64).exp()
}

/// Corpus BLEU in [0, 100]: n-gram statistics and lengths pooled over all
/// pairs before the geometric mean and brevity penalty.
pub fn corpus_bleu(pairs: &[(TokenSequence, TokenSequence)], cfg: &BleuConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("corpus_bleu of empty pair list".into()));
    }
    assert!(cfg.max_n >= 1, "corpus_bleu requires max_n >= 1");
    let mut clipped = vec![0usize; cfg.max_n];
    let mut totals = vec![0usize; cfg.max_n];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in pairs {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=cfg.max_n {
            let (c, t) = clipped_counts(&hyp.raw, &reference.raw, n);
            clipped[n - 1] += c;
            totals[n - 1] += t;
        }
    }
    if hyp_len == 0 || ref_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..cfg.max_n {
        match precision_log(clipped[n], totals[n], cfg) {
            Some(lp) => log_sum += lp,
            None => return Ok(0.0),
        }
    }
    Ok(100.0 * brevity_penalty(hyp_len, ref_len) * (log_sum / cfg.max_n as f64).exp())
}

fn bleu_row(texts: &[TokenSequence], i: usize, cfg: &BleuConfig) -> Vec<f64> {
    (0..texts.len())
        .map(|j| if i == j { 1.0 } else { bleu(&texts[i], &texts[j], cfg) })
        .collect()
}

/// Pairwise sentence-BLEU matrix: entry (i, j) scores texts[i] as the
/// hypothesis against texts[j] as the reference; the diagonal is exactly 1.
/// Generally asymmetric because of the brevity penalty.
pub fn pairwise_bleu_matrix(texts: &[TokenSequence], cfg: &BleuConfig) -> Result<Matrix> {
    pairwise_bleu_rows(texts, cfg, true)
}

/// Sequential reference path for the pairwise matrix.
pub fn pairwise_bleu_matrix_seq(texts: &[TokenSequence], cfg: &BleuConfig) -> Result<Matrix> {
    pairwise_bleu_rows(texts, cfg, false)
}

fn pairwise_bleu_rows(texts: &[TokenSequence], cfg: &BleuConfig, parallel: bool) -> Result<Matrix> {
    if texts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise_bleu_matrix needs at least 2 texts, got {}",
            texts.len()
        )));
    }
    let n = texts.len();
    let rows: Vec<Vec<f64>> = crate::par::map_indices(n, parallel, |i| bleu_row(texts, i, cfg));
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        m.data[i * n..(i + 1) * n].copy_from_slice(row);
    }
    Ok(m)
}

/// Join raw tokens with single spaces (detokenization is not fancier
/// than that here).
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .filter(|&&id| id != PAD_ID && id != BOS_ID && id != EOS_ID)
        .map(|&id| vocab.token_of(id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(text: &str) -> TokenSequence {
        let vocab = Vocabulary::build(&[text]);
        tokenize(text, &vocab)
    }

    fn seq_with(text: &str, vocab: &Vocabulary) -> TokenSequence {
        tokenize(text, vocab)
    }

    #[test]
    fn tokenize_splits_punctuation() {
        let v = Vocabulary::build(&["The movement, allegro."]);
        let t = tokenize("The movement, allegro.", &v);
        assert_eq!(t.raw, vec!["the", "movement", ",", "allegro", "."]);
        assert_eq!(t.ids[0], BOS_ID);
        assert_eq!(*t.ids.last().unwrap(), EOS_ID);
        // round trip through the vocabulary
        for (id, raw) in t.ids[1..t.ids.len() - 1].iter().zip(&t.raw) {
            assert_eq!(v.token_of(*id).unwrap(), raw);
        }
    }

    #[test]
    fn tokenize_blank_input() {
        let v = Vocabulary::new();
        let t = tokenize("", &v);
        assert!(t.raw.is_empty());
        assert_eq!(t.ids, vec![BOS_ID, EOS_ID]);
    }

    #[test]
    fn unknown_token_maps_to_unk() {
        let v = Vocabulary::build(&["adagio"]);
        let t = tokenize("Adagio cantabile", &v);
        assert_eq!(t.raw, vec!["adagio", "cantabile"]);
        assert_eq!(t.ids[1], v.id_of("adagio"));
        assert_eq!(t.ids[2], UNK_ID);
    }

    #[test]
    fn bleu_identity_is_one() {
        let t = seq("the quick brown fox jumps");
        let cfg = BleuConfig { max_n: 4, smoothing: false, epsilon: 0.1, symmetrize: false };
        assert_eq!(bleu(&t, &t, &cfg), 1.0);
    }

    #[test]
    fn bleu_clipped_precision_case() {
        // hyp = [the,the,the], ref = [the,cat]: clipped p1 = 1/3, BP = 1.
        let v = Vocabulary::build(&["the cat"]);
        let hyp = seq_with("the the the", &v);
        let r = seq_with("the cat", &v);
        let cfg = BleuConfig { max_n: 1, smoothing: false, epsilon: 0.1, symmetrize: false };
        let got = bleu(&hyp, &r, &cfg);
        assert!((got - 1.0 / 3.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn bleu_disjoint_vocabulary_is_zero() {
        let v = Vocabulary::build(&["aa bb cc dd ee ff"]);
        let hyp = seq_with("aa bb cc", &v);
        let r = seq_with("dd ee ff", &v);
        let cfg = BleuConfig { max_n: 4, smoothing: false, epsilon: 0.1, symmetrize: false };
        assert_eq!(bleu(&hyp, &r, &cfg), 0.0);
    }

    #[test]
    fn bleu_empty_scores_zero_not_error() {
        let v = Vocabulary::new();
        let empty = tokenize("", &v);
        let something = seq("abc def");
        let cfg = BleuConfig::evaluation();
        assert_eq!(bleu(&empty, &something, &cfg), 0.0);
        assert_eq!(bleu(&something, &empty, &cfg), 0.0);
    }

    #[test]
    fn corpus_identity_is_exactly_100() {
        let t = seq("the cat sat on the mat");
        let pairs = vec![(t.clone(), t)];
        assert_eq!(corpus_bleu(&pairs, &BleuConfig::evaluation()).unwrap(), 100.0);
    }

    #[test]
    fn corpus_single_pair_equals_scaled_sentence_bleu() {
        let v = Vocabulary::build(&["the cat sat ran"]);
        let hyp = seq_with("the cat sat", &v);
        let r = seq_with("the cat ran", &v);
        let cfg = BleuConfig { max_n: 2, smoothing: false, epsilon: 0.1, symmetrize: false };
        let single = corpus_bleu(&[(hyp.clone(), r.clone())], &cfg).unwrap();
        assert!((single - 100.0 * bleu(&hyp, &r, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn corpus_two_pair_pooled_hand_value() {
        // Pooled over two 4-token pairs: p1 = 6/8, p2 = 3/6, BP = 1
        // → 100·exp((ln(6/8)+ln(3/6))/2) = 61.237243569579455.
        let v = Vocabulary::build(&["a b c d x p q r s z"]);
        let pairs = vec![
            (seq_with("a b c d", &v), seq_with("a b x d", &v)),
            (seq_with("p q r s", &v), seq_with("p q r z", &v)),
        ];
        let cfg = BleuConfig { max_n: 2, smoothing: false, epsilon: 0.1, symmetrize: false };
        let got = corpus_bleu(&pairs, &cfg).unwrap();
        assert!((got - 61.237243569579455).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn corpus_rejects_empty_list() {
        assert!(matches!(
            corpus_bleu(&[], &BleuConfig::evaluation()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn pairwise_matrix_identical_corpus_is_all_ones() {
        let t = seq("same text everywhere");
        let texts = vec![t.clone(), t.clone(), t];
        let m = pairwise_bleu_matrix(&texts, &BleuConfig::evaluation()).unwrap();
        assert!(m.data.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn pairwise_matrix_diagonal_exactly_one() {
        let v = Vocabulary::build(&["a b c d e f g h"]);
        let texts = vec![seq_with("a b", &v), seq_with("c d e", &v), seq_with("f g h a", &v)];
        let m = pairwise_bleu_matrix(&texts, &BleuConfig::evaluation()).unwrap();
        for i in 0..3 {
            assert_eq!(m.at(i, i), 1.0);
        }
    }

    #[test]
    fn pairwise_matrix_par_matches_seq_bitwise() {
        let v = Vocabulary::build(&["a b c d e f g h i j k"]);
        let texts: Vec<TokenSequence> = ["a b c", "c d e f", "a c e g", "b b c k", "j k a"]
            .iter()
            .map(|t| seq_with(t, &v))
            .collect();
        let cfg = BleuConfig::topology();
        let par = pairwise_bleu_matrix(&texts, &cfg).unwrap();
        let seq = pairwise_bleu_matrix_seq(&texts, &cfg).unwrap();
        assert_eq!(par.data, seq.data);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::build(&["the movement begins softly"]);
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(v.size(), loaded.size());
        for t in ["the", "movement", "begins", "softly"] {
            assert_eq!(v.id_of(t), loaded.id_of(t));
            assert!(loaded.id_of(t) >= RESERVED as u32);
        }
    }
}
