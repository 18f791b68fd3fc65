//! Synthetic paired-corpus generator.
//!
//! Feature matrices are a shared smooth base plus small perturbation
//! patterns keyed to latent attributes, so raw features are nearly
//! indistinguishable (pairwise cosine ≳ 0.99) while remaining learnable.
//! Texts come from a wide template grammar keyed to the same attributes,
//! so pairwise BLEU stays low for the vast majority of pairs. Both
//! statistics are verified before a corpus is accepted.

use crate::data::lexicon::{lexicon_sentiment, SentimentClass};
use crate::data::{Ensemble, Instrument, Mode, PairedSample, TagSet, Tempo};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::simkernel::{pairwise_cosine_matrix, similarity_spread_stats};
use crate::textmetric::{pairwise_bleu_matrix, tokenize, BleuConfig, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub feature_bins: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    /// Scale of the attribute-keyed perturbation relative to the base.
    pub perturb_scale: f64,
    /// Scale of the per-entry noise.
    pub noise_scale: f64,
    /// Verify the corpus statistics before accepting (applies from 50
    /// samples up; tiny corpora have meaningless pair statistics).
    pub self_check: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            feature_bins: 32,
            frames_min: 24,
            frames_max: 48,
            perturb_scale: 0.20,
            noise_scale: 0.01,
            self_check: true,
        }
    }
}

/// Measured corpus statistics, printed by the `synth` subcommand and
/// enforced by the generator self-check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorpusStats {
    /// Mean off-diagonal cosine over time-pooled feature vectors.
    pub feature_cosine_mean: f64,
    /// Fraction of off-diagonal sentence-BLEU pairs below the threshold.
    pub bleu_below_fraction: f64,
    pub bleu_threshold: f64,
    pub samples: usize,
}

const MOOD_WEIGHTS: [(SentimentClass, f64); 7] = [
    (SentimentClass::Joy, 0.55),
    (SentimentClass::Neutral, 0.20),
    (SentimentClass::Sadness, 0.12),
    (SentimentClass::Fear, 0.05),
    (SentimentClass::Surprise, 0.04),
    (SentimentClass::Anger, 0.02),
    (SentimentClass::Disgust, 0.02),
];

fn mood_words(class: SentimentClass) -> &'static [&'static str] {
    match class {
        SentimentClass::Joy => {
            &["bright", "lively", "joyous", "cheerful", "radiant", "peaceful", "beautiful", "tender"]
        }
        SentimentClass::Neutral => &["calm", "steady", "measured", "plain", "austere"],
        SentimentClass::Sadness => &["mournful", "elegiac", "somber", "wistful", "gloomy"],
        SentimentClass::Fear => &["ominous", "uneasy", "shadowy", "anxious", "dark"],
        SentimentClass::Anger => &["stormy", "furious", "fierce", "violent"],
        SentimentClass::Disgust => &["harsh", "grating", "coarse"],
        SentimentClass::Surprise => &["sudden", "unexpected", "startling", "abrupt"],
    }
}

fn tempo_words(tempo: Tempo) -> &'static [&'static str] {
    match tempo {
        Tempo::Slow => &["grave", "largo", "lento", "adagio"],
        Tempo::Medium => &["andante", "moderato", "andantino"],
        Tempo::Fast => &["allegro", "allegretto", "vivace"],
        Tempo::SuperFast => &["presto", "prestissimo"],
    }
}

fn instrument_words(instrument: Instrument) -> &'static [&'static str] {
    match instrument {
        Instrument::String => &["strings", "violin", "cello", "viola"],
        Instrument::Wind => &["winds", "flute", "clarinet", "oboe"],
        Instrument::Piano => &["piano", "keyboard"],
    }
}

fn ensemble_words(ensemble: Ensemble) -> &'static [&'static str] {
    match ensemble {
        Ensemble::Sonate => &["sonata"],
        Ensemble::Trio => &["trio"],
        Ensemble::Quartet => &["quartet"],
        Ensemble::QuintetOrMore => &["quintet", "sextet"],
    }
}

const NOUNS: [&str; 12] = [
    "theme", "melody", "figure", "motif", "subject", "fugue", "variation", "phrase", "passage",
    "episode", "refrain", "chorale",
];
const VERBS: [&str; 7] = ["begins", "opens", "unfolds", "enters", "surges", "emerges", "proceeds"];

/// Latent attributes behind one sample; tags and text both derive from it.
#[derive(Debug, Clone, Copy)]
struct Attributes {
    mode: Mode,
    instrument: Instrument,
    tempo: Tempo,
    ensemble: Ensemble,
    mood: SentimentClass,
}

impl Attributes {
    /// Flat index of every attribute value, used to look up perturbation
    /// patterns. Order: 2 modes, 3 instruments, 4 tempi, 4 ensembles,
    /// 7 moods = 20 pattern slots.
    fn pattern_slots(&self) -> [usize; 5] {
        let mode = self.mode as usize;
        let instrument = 2 + self.instrument as usize;
        let tempo = 5 + self.tempo as usize;
        let ensemble = 9 + self.ensemble as usize;
        let mood = 13 + self.mood.index();
        [mode, instrument, tempo, ensemble, mood]
    }
}

const PATTERN_SLOTS: usize = 20;

/// Corpus-level structure shared by every sample.
struct CorpusPatterns {
    base: Vec<f64>,
    /// Unit-norm perturbation pattern per attribute value.
    patterns: Vec<Vec<f64>>,
    /// (frequency, phase) of each pattern's temporal modulation.
    waves: Vec<(f64, f64)>,
}

fn build_patterns(bins: usize, rng: &mut ChaCha8Rng) -> CorpusPatterns {
    let base: Vec<f64> = (0..bins)
        .map(|b| 1.2 + 0.5 * (TAU * 1.1 * b as f64 / bins as f64).sin() + rng.gen_range(-0.15..0.15))
        .collect();
    let mut patterns = Vec::with_capacity(PATTERN_SLOTS);
    let mut waves = Vec::with_capacity(PATTERN_SLOTS);
    for _ in 0..PATTERN_SLOTS {
        let mut p: Vec<f64> = (0..bins).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in p.iter_mut() {
            *v /= norm;
        }
        patterns.push(p);
        waves.push((rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.0)));
    }
    CorpusPatterns { base, patterns, waves }
}

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.gen_range(0..options.len())]
}

fn pick_weighted<T: Copy>(rng: &mut ChaCha8Rng, weighted: &[(T, f64)]) -> T {
    let total: f64 = weighted.iter().map(|(_, w)| w).sum();
    let mut draw = rng.gen_range(0.0..total);
    for (v, w) in weighted {
        if draw < *w {
            return *v;
        }
        draw -= w;
    }
    weighted.last().expect("non-empty weights").0
}

fn sample_attributes(rng: &mut ChaCha8Rng) -> Attributes {
    Attributes {
        mode: pick_weighted(rng, &[(Mode::Major, 0.6), (Mode::Minor, 0.4)]),
        instrument: pick_weighted(
            rng,
            &[(Instrument::String, 0.5), (Instrument::Wind, 0.2), (Instrument::Piano, 0.3)],
        ),
        tempo: pick_weighted(
            rng,
            &[
                (Tempo::Slow, 0.25),
                (Tempo::Medium, 0.25),
                (Tempo::Fast, 0.35),
                (Tempo::SuperFast, 0.15),
            ],
        ),
        ensemble: pick_weighted(
            rng,
            &[
                (Ensemble::Sonate, 0.3),
                (Ensemble::Trio, 0.2),
                (Ensemble::Quartet, 0.35),
                (Ensemble::QuintetOrMore, 0.15),
            ],
        ),
        mood: pick_weighted(rng, &MOOD_WEIGHTS),
    }
}

fn features_for(
    attrs: &Attributes,
    frames: usize,
    cfg: &SynthConfig,
    corpus: &CorpusPatterns,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    let bins = cfg.feature_bins;
    let slots = attrs.pattern_slots();
    let mut m = Matrix::zeros(bins, frames);
    for t in 0..frames {
        let tau = t as f64 / frames as f64;
        let envelope = 1.0 + 0.1 * (TAU * tau).sin();
        for b in 0..bins {
            let mut v = corpus.base[b] * envelope;
            for &slot in &slots {
                let (freq, phase) = corpus.waves[slot];
                let wave = 1.0 + 0.3 * (TAU * (freq * tau + phase)).sin();
                v += cfg.perturb_scale * corpus.patterns[slot][b] * wave;
            }
            v += cfg.noise_scale * rng.gen_range(-1.0..1.0);
            m.data[b * frames + t] = v;
        }
    }
    m
}

/// Opening-clause templates. T tempo, I instrument, E ensemble, M mood,
/// N/N2 nouns, V verb. The first template mirrors the recurring
/// "the movement, allegro, begins with ..." phrasing of real references.
fn opening_clause(rng: &mut ChaCha8Rng, a: &Attributes) -> String {
    let t = pick(rng, tempo_words(a.tempo));
    let i = pick(rng, instrument_words(a.instrument));
    let e = pick(rng, ensemble_words(a.ensemble));
    let m = pick(rng, mood_words(a.mood));
    let n = pick(rng, &NOUNS);
    let n2 = pick(rng, &NOUNS);
    let v = pick(rng, &VERBS);
    match rng.gen_range(0..12) {
        0 => format!("the movement , {t} , {v} with a {m} {n} in the {i} ."),
        1 => format!("marked {t} , the {e} {v} with a {m} {n} ."),
        2 => format!("a {m} {n} {v} this {t} movement for {i} ."),
        3 => format!("the {t} finale {v} with a {m} {n} and a {n2} in the {i} ."),
        4 => format!("this {e} movement , {t} , carries a {m} {n} ."),
        5 => format!("the {n} , first heard in the {i} , opens a {m} {t} movement ."),
        6 => format!("in this {t} movement the {i} states a {m} {n} ."),
        7 => format!("the {e} turns to a {m} {n} at the {t} opening ."),
        8 => format!("the movement , {t} , rests on a {m} {n} from the {i} ."),
        9 => format!("a {t} introduction leads to a {m} {n} for the {e} ."),
        10 => format!("the {i} announces the {m} {n} of this {t} movement ."),
        _ => format!("over a {n2} the {i} carries a {m} {n} , {t} throughout ."),
    }
}

fn closing_clause(rng: &mut ChaCha8Rng, a: &Attributes) -> String {
    let i2 = pick(rng, instrument_words(a.instrument));
    let e = pick(rng, ensemble_words(a.ensemble));
    let n2 = pick(rng, &NOUNS);
    match rng.gen_range(0..12) {
        0 => format!("a {n2} follows in the {i2} ."),
        1 => format!("the {n2} returns before the coda ."),
        2 => format!("development of the {n2} spans the middle section ."),
        3 => format!("the {i2} answers with a {n2} ."),
        4 => format!("a brief {n2} closes the movement ."),
        5 => format!("the second {n2} appears in the {i2} ."),
        6 => format!("echoes of the {n2} persist to the close ."),
        7 => format!("the {e} restates the {n2} in unison ."),
        8 => format!("a quiet {n2} brings the close ."),
        9 => format!("the {n2} builds toward a full close ."),
        10 => format!("fragments of the {n2} pass between the {i2} ."),
        _ => format!("the close recalls the {n2} once more ."),
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Generate `n` paired samples. Deterministic per (config, n, seed);
/// samples are independent so generation parallelizes per sample.
pub fn synth_generate(cfg: &SynthConfig, n: usize, seed: u64) -> Result<Vec<PairedSample>> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("synthetic corpus needs n >= 10, got {n}")));
    }
    if cfg.frames_min < 2 || cfg.frames_max < cfg.frames_min {
        return Err(Error::InvalidConfig("bad frame range".into()));
    }
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = build_patterns(cfg.feature_bins, &mut corpus_rng);

    let samples: Vec<PairedSample> = crate::par::map_indices(n, true, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (i as u64).wrapping_mul(0x2545F4914F6CDD1D)));
        let attrs = sample_attributes(&mut rng);
        let frames = rng.gen_range(cfg.frames_min..=cfg.frames_max);
        let features = features_for(&attrs, frames, cfg, &corpus, &mut rng);
        let text = format!("{} {}", opening_clause(&mut rng, &attrs), closing_clause(&mut rng, &attrs));
        let sentiment = lexicon_sentiment(&text);
        debug_assert_eq!(sentiment, attrs.mood, "mood word must drive the lexicon label");
        PairedSample {
            id: format!("s{i:05}"),
            features,
            text,
            tags: TagSet {
                mode: attrs.mode,
                instrument: attrs.instrument,
                tempo: attrs.tempo,
                ensemble: attrs.ensemble,
            },
            sentiment,
        }
    });

    if cfg.self_check && n >= 50 {
        let stats = verify_corpus_stats(&samples)?;
        if stats.feature_cosine_mean < 0.95 {
            return Err(Error::InvalidInput(format!(
                "generator self-check failed: feature cosine mean {:.4} < 0.95",
                stats.feature_cosine_mean
            )));
        }
        if stats.bleu_below_fraction < 0.90 {
            return Err(Error::InvalidInput(format!(
                "generator self-check failed: only {:.1}% of text pairs below BLEU {}",
                100.0 * stats.bleu_below_fraction,
                stats.bleu_threshold
            )));
        }
    }
    Ok(samples)
}

/// Default-config generation (the `synth` subcommand path).
pub fn synth_generate_default(n: usize, seed: u64) -> Result<Vec<PairedSample>> {
    synth_generate(&SynthConfig::default(), n, seed)
}

/// Time-pooled feature vector: per-bin mean over frames.
pub fn pooled_feature_vector(features: &Matrix) -> Vec<f64> {
    let (bins, frames) = features.shape();
    (0..bins)
        .map(|b| features.row(b).iter().sum::<f64>() / frames as f64)
        .collect()
}

/// Measure the two corpus statistics the generator must reproduce:
/// near-degenerate features and highly discriminative texts.
pub fn verify_corpus_stats(samples: &[PairedSample]) -> Result<CorpusStats> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("corpus stats need at least 2 samples".into()));
    }
    let pooled: Vec<Vec<f64>> = samples.iter().map(|s| pooled_feature_vector(&s.features)).collect();
    let cos = pairwise_cosine_matrix(&pooled)?;
    let cos_stats = similarity_spread_stats(&cos)?;

    let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
    let vocab = Vocabulary::build(&texts);
    let tokenized: Vec<_> = texts.iter().map(|t| tokenize(t, &vocab)).collect();
    let bleu = pairwise_bleu_matrix(&tokenized, &BleuConfig::evaluation())?;
    let n = samples.len();
    let mut below = 0usize;
    let threshold = 0.06;
    for i in 0..n {
        for j in 0..n {
            if i != j && bleu.at(i, j) < threshold {
                below += 1;
            }
        }
    }
    Ok(CorpusStats {
        feature_cosine_mean: cos_stats.mean,
        bleu_below_fraction: below as f64 / (n * n - n) as f64,
        bleu_threshold: threshold,
        samples: n,
    })
}
