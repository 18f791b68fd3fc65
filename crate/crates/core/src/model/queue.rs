//! Momentum reference queue: a ring of detached ⟨latent, text⟩ entries
//! encoded by a slowly updated copy of the source encoder.

use crate::data::PairedSample;
use crate::error::Result;
use crate::model::ModelBundle;
use crate::numcore::ParamStore;
use crate::textmetric::TokenSequence;
use std::collections::VecDeque;

/// One group-reference entry. The latent is a plain value vector — it has
/// no tape linkage, so gradients can never reach it.
#[derive(Debug, Clone)]
pub struct QueueEntry {
    pub sample_id: String,
    pub latent: Vec<f64>,
    pub tokens: TokenSequence,
}

#[derive(Debug, Clone)]
pub struct MomentumQueue {
    capacity: usize,
    entries: VecDeque<QueueEntry>,
    /// Momentum copy of the source-encoder parameters (`f.*` only).
    pub encoder_params: ParamStore,
    pub momentum: f64,
}

impl MomentumQueue {
    /// Capacity is the group size k−1. The encoder copy starts equal to
    /// the live `f.*` parameters.
    pub fn new(capacity: usize, live: &ParamStore, momentum: f64) -> Self {
        MomentumQueue {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
            encoder_params: live.subset(|n| n.starts_with("f.")),
            momentum,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.iter()
    }

    /// Encode the sample with the momentum encoder, detach, enqueue;
    /// evict the oldest entry when full.
    pub fn push(&mut self, bundle: &ModelBundle, sample: &PairedSample, tokens: &TokenSequence) -> Result<()> {
        let latent = bundle.encode_source_with(&self.encoder_params, &sample.features)?;
        self.entries.push_back(QueueEntry {
            sample_id: sample.id.clone(),
            latent: latent.values,
            tokens: tokens.clone(),
        });
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// θ_copy ← m·θ_copy + (1−m)·θ_live, per parameter.
    pub fn momentum_update(&mut self, live: &ParamStore) -> Result<()> {
        self.encoder_params.momentum_blend(live, self.momentum)
    }

    /// Group reference for an anchor: every queued entry except ones that
    /// carry the anchor's own id.
    pub fn group_for(&self, anchor_id: &str) -> Vec<&QueueEntry> {
        self.entries.iter().filter(|e| e.sample_id != anchor_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::model::ModelConfig;
    use crate::textmetric::{tokenize, Vocabulary};

    fn setup() -> (ModelBundle, Vec<PairedSample>, Vocabulary) {
        let samples = synth_generate(
            &SynthConfig { feature_bins: 6, frames_min: 4, frames_max: 8, ..SynthConfig::default() },
            12,
            7,
        )
        .unwrap();
        let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
        let vocab = Vocabulary::build(&texts);
        let cfg = ModelConfig { vocab_size: vocab.size(), ..ModelConfig::mini(vocab.size()) };
        (ModelBundle::init(cfg, 0), samples, vocab)
    }

    #[test]
    fn ring_semantics_evict_oldest() {
        let (bundle, samples, vocab) = setup();
        let capacity = 5;
        let mut q = MomentumQueue::new(capacity, &bundle.params, 0.999);
        for s in samples.iter().take(capacity + 3) {
            let toks = tokenize(&s.text, &vocab);
            q.push(&bundle, s, &toks).unwrap();
        }
        assert_eq!(q.len(), capacity);
        let kept: Vec<&str> = q.entries().map(|e| e.sample_id.as_str()).collect();
        let expected: Vec<&str> =
            samples[3..capacity + 3].iter().map(|s| s.id.as_str()).collect();
        assert_eq!(kept, expected);
    }

    #[test]
    fn partially_filled_queue_keeps_all() {
        let (bundle, samples, vocab) = setup();
        let mut q = MomentumQueue::new(31, &bundle.params, 0.999);
        for s in samples.iter().take(4) {
            let toks = tokenize(&s.text, &vocab);
            q.push(&bundle, s, &toks).unwrap();
        }
        assert_eq!(q.len(), 4);
        assert_eq!(q.capacity(), 31);
    }

    #[test]
    fn group_excludes_anchor_id() {
        let (bundle, samples, vocab) = setup();
        let mut q = MomentumQueue::new(8, &bundle.params, 0.999);
        for s in samples.iter().take(6) {
            let toks = tokenize(&s.text, &vocab);
            q.push(&bundle, s, &toks).unwrap();
        }
        let anchor = &samples[2];
        let group = q.group_for(&anchor.id);
        assert_eq!(group.len(), 5);
        assert!(group.iter().all(|e| e.sample_id != anchor.id));
    }

    #[test]
    fn momentum_copy_converges_geometrically() {
        // With frozen live params, |copy(n) − live| = m^n · |copy(0) − live|.
        let (bundle, _, _) = setup();
        let live = &bundle.params;
        let mut q = MomentumQueue::new(4, live, 0.999);
        // Shift the copy away from live by +1 on one entry.
        let name = "f.conv1.w";
        q.encoder_params.value_mut(name).data[0] += 1.0;
        let start_delta = q.encoder_params.value(name).data[0] - live.value(name).data[0];
        assert_eq!(start_delta, 1.0);
        for n in 1..=100u32 {
            q.momentum_update(live).unwrap();
            let delta = q.encoder_params.value(name).data[0] - live.value(name).data[0];
            let expected = 0.999f64.powi(n as i32) * start_delta;
            assert!(
                (delta - expected).abs() <= 1e-12,
                "step {n}: delta {delta} vs {expected}"
            );
        }
    }

    #[test]
    fn momentum_update_rejects_out_of_range() {
        let (bundle, _, _) = setup();
        let mut q = MomentumQueue::new(4, &bundle.params, 1.5);
        assert!(q.momentum_update(&bundle.params).is_err());
    }
}
