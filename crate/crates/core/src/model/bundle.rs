//! Forward-pass builders for every network component. All passes are
//! written against the tape, so training, momentum encoding, and greedy
//! decoding share one code path and stay bit-deterministic.

use crate::error::{Error, Result};
use crate::model::{LatentRep, MapDirection, ModelConfig};
use crate::numcore::{Matrix, NodeId, ParamStore, Tape};
use crate::textmetric::{TokenSequence, BOS_ID, EOS_ID, PAD_ID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The full parameter bundle: source/feature autoencoder (`f.*`,
/// `fdec.*`), text autoencoder (`g.*`, `gdec.*`), latent mapping
/// autoencoder (`map.*`), and sentiment head (`sent.*`).
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub cfg: ModelConfig,
    pub params: ParamStore,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect())
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, a: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect())
}

fn near_identity(rng: &mut ChaCha8Rng, n: usize, noise: f64) -> Matrix {
    let mut m = uniform(rng, n, n, noise);
    for i in 0..n {
        m.data[i * n + i] += 1.0;
    }
    m
}

impl ModelBundle {
    /// Deterministic initialization from a seed.
    pub fn init(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let k = cfg.kernel;
        let (f_bins, ch, d) = (cfg.feature_bins, cfg.conv_hidden, cfg.latent_dim);
        let (v, e, dh, cx) = (cfg.vocab_size, cfg.embed_dim, cfg.dec_hidden, cfg.ctx_dim);
        let flat = cfg.latent_flat();

        // source encoder: conv stack over the time axis
        p.insert("f.conv1.w", xavier(&mut rng, ch, f_bins * k, f_bins * k, ch));
        p.insert("f.conv1.b", Matrix::zeros(1, ch));
        p.insert("f.conv2.w", xavier(&mut rng, ch, ch * k, ch * k, ch));
        p.insert("f.conv2.b", Matrix::zeros(1, ch));
        p.insert("f.conv3.w", xavier(&mut rng, d, ch * k, ch * k, d));
        p.insert("f.conv3.b", Matrix::zeros(1, d));

        // source decoder: segment unpool then conv stack back to F bins
        p.insert("fdec.conv1.w", xavier(&mut rng, ch, d * k, d * k, ch));
        p.insert("fdec.conv1.b", Matrix::zeros(1, ch));
        p.insert("fdec.conv2.w", xavier(&mut rng, ch, ch * k, ch * k, ch));
        p.insert("fdec.conv2.b", Matrix::zeros(1, ch));
        p.insert("fdec.conv3.w", xavier(&mut rng, f_bins, ch * k, ch * k, f_bins));
        p.insert("fdec.conv3.b", Matrix::zeros(1, f_bins));

        // text encoder: embedding + positions, then a two-layer conv mixer
        p.insert("g.embed", uniform(&mut rng, v, e, 0.1));
        p.insert("g.pos", uniform(&mut rng, cfg.max_positions, e, 0.05));
        p.insert("g.conv1.w", xavier(&mut rng, ch, e * k, e * k, ch));
        p.insert("g.conv1.b", Matrix::zeros(1, ch));
        p.insert("g.conv2.w", xavier(&mut rng, d, ch * k, ch * k, d));
        p.insert("g.conv2.b", Matrix::zeros(1, d));

        // text decoder: two-layer recurrent autoregressive net conditioned
        // on the latent through the initial state and a per-step context
        p.insert("gdec.embed", uniform(&mut rng, v, e, 0.1));
        p.insert("gdec.init1.w", xavier(&mut rng, flat, dh, flat, dh));
        p.insert("gdec.init1.b", Matrix::zeros(1, dh));
        p.insert("gdec.init2.w", xavier(&mut rng, flat, dh, flat, dh));
        p.insert("gdec.init2.b", Matrix::zeros(1, dh));
        p.insert("gdec.ctx.w", xavier(&mut rng, flat, cx, flat, cx));
        p.insert("gdec.ctx.b", Matrix::zeros(1, cx));
        p.insert("gdec.wx1", xavier(&mut rng, e + cx, dh, e + cx, dh));
        p.insert("gdec.wh1", xavier(&mut rng, dh, dh, dh, dh));
        p.insert("gdec.b1", Matrix::zeros(1, dh));
        p.insert("gdec.wx2", xavier(&mut rng, dh, dh, dh, dh));
        p.insert("gdec.wh2", xavier(&mut rng, dh, dh, dh, dh));
        p.insert("gdec.b2", Matrix::zeros(1, dh));
        p.insert("gdec.out.w", xavier(&mut rng, dh, v, dh, v));
        p.insert("gdec.out.b", Matrix::zeros(1, v));

        // latent mapping autoencoder halves, near identity at init
        p.insert("map.fwd.w", near_identity(&mut rng, flat, 0.01));
        p.insert("map.fwd.b", Matrix::zeros(1, flat));
        p.insert("map.bwd.w", near_identity(&mut rng, flat, 0.01));
        p.insert("map.bwd.b", Matrix::zeros(1, flat));

        // sentiment head over the mean soft token distribution
        p.insert("sent.w1", xavier(&mut rng, v, cfg.sent_hidden, v, cfg.sent_hidden));
        p.insert("sent.b1", Matrix::zeros(1, cfg.sent_hidden));
        p.insert("sent.w2", xavier(&mut rng, cfg.sent_hidden, cfg.classes, cfg.sent_hidden, cfg.classes));
        p.insert("sent.b2", Matrix::zeros(1, cfg.classes));

        ModelBundle { cfg, params: p }
    }

    // ── source/feature side ──────────────────────────────────────────

    /// Conv stack over the time axis followed by segment mean-pooling.
    /// Output node is S×d. `params` is explicit so the momentum copy can
    /// drive the same pass.
    pub fn encode_source_on(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        features: &Matrix,
    ) -> Result<NodeId> {
        let cfg = &self.cfg;
        if features.rows != cfg.feature_bins {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows, expected {}",
                features.rows, cfg.feature_bins
            )));
        }
        if features.cols < cfg.segments {
            return Err(Error::InvalidInput(format!(
                "feature matrix has {} frames, needs at least {} segments",
                features.cols, cfg.segments
            )));
        }
        features.check_finite("feature matrix")?;
        let x = tape.input(features.clone());
        self.encode_source_node(tape, params, x)
    }

    /// Same pass over an existing tape node (used for augmented views).
    pub fn encode_source_node(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId> {
        let k = self.cfg.kernel;
        let w1 = tape.param(params, "f.conv1.w");
        let b1 = tape.param(params, "f.conv1.b");
        let w2 = tape.param(params, "f.conv2.w");
        let b2 = tape.param(params, "f.conv2.b");
        let w3 = tape.param(params, "f.conv3.w");
        let b3 = tape.param(params, "f.conv3.b");
        let h = tape.conv1d(x, w1, b1, k);
        let h = tape.tanh(h);
        let h = tape.conv1d(h, w2, b2, k);
        let h = tape.tanh(h);
        let h = tape.conv1d(h, w3, b3, k); // d×T
        let h = tape.transpose(h); // T×d
        Ok(tape.segment_pool(h, self.cfg.segments))
    }

    /// Value-level encode with the live parameters.
    pub fn encode_source(&self, features: &Matrix) -> Result<LatentRep> {
        self.encode_source_with(&self.params, features)
    }

    /// Value-level encode with explicit parameters (momentum copy).
    pub fn encode_source_with(&self, params: &ParamStore, features: &Matrix) -> Result<LatentRep> {
        let mut tape = Tape::new();
        let node = self.encode_source_on(&mut tape, params, features)?;
        Ok(LatentRep::from_matrix(tape.value(node)))
    }

    /// Upsample the latent back to `frames` and run the transposed conv
    /// stack; output node is F×frames.
    pub fn decode_source_on(&self, tape: &mut Tape, latent: NodeId, frames: usize) -> NodeId {
        let k = self.cfg.kernel;
        let up = tape.segment_unpool(latent, frames); // frames×d
        let up = tape.transpose(up); // d×frames
        let w1 = tape.param(&self.params, "fdec.conv1.w");
        let b1 = tape.param(&self.params, "fdec.conv1.b");
        let w2 = tape.param(&self.params, "fdec.conv2.w");
        let b2 = tape.param(&self.params, "fdec.conv2.b");
        let w3 = tape.param(&self.params, "fdec.conv3.w");
        let b3 = tape.param(&self.params, "fdec.conv3.b");
        let h = tape.conv1d(up, w1, b1, k);
        let h = tape.tanh(h);
        let h = tape.conv1d(h, w2, b2, k);
        let h = tape.tanh(h);
        tape.conv1d(h, w3, b3, k)
    }

    // ── text side ────────────────────────────────────────────────────

    /// Embedding + positional mixing encoder with segment mean-pooling.
    /// Short sequences are right-padded with PAD up to S positions.
    pub fn encode_text_on(&self, tape: &mut Tape, tokens: &TokenSequence) -> Result<NodeId> {
        let cfg = &self.cfg;
        let mut ids: Vec<usize> = tokens.ids.iter().map(|&i| i as usize).collect();
        while ids.len() < cfg.segments {
            ids.push(PAD_ID as usize);
        }
        let positions: Vec<usize> =
            (0..ids.len()).map(|t| t.min(cfg.max_positions - 1)).collect();
        let table = tape.param(&self.params, "g.embed");
        let pos_table = tape.param(&self.params, "g.pos");
        let emb = tape.embed_rows(table, ids);
        let pos = tape.embed_rows(pos_table, positions);
        let x = tape.add(emb, pos); // L×e
        let x = tape.transpose(x); // e×L
        let w1 = tape.param(&self.params, "g.conv1.w");
        let b1 = tape.param(&self.params, "g.conv1.b");
        let w2 = tape.param(&self.params, "g.conv2.w");
        let b2 = tape.param(&self.params, "g.conv2.b");
        let h = tape.conv1d(x, w1, b1, cfg.kernel);
        let h = tape.tanh(h);
        let h = tape.conv1d(h, w2, b2, cfg.kernel); // d×L
        let h = tape.transpose(h); // L×d
        Ok(tape.segment_pool(h, cfg.segments))
    }

    pub fn encode_text(&self, tokens: &TokenSequence) -> Result<LatentRep> {
        let mut tape = Tape::new();
        let node = self.encode_text_on(&mut tape, tokens)?;
        Ok(LatentRep::from_matrix(tape.value(node)))
    }

    /// Decoder initial states and per-step context from a latent node.
    fn decoder_init(&self, tape: &mut Tape, latent: NodeId) -> (NodeId, NodeId, NodeId) {
        let flat = self.cfg.latent_flat();
        let z = tape.reshape(latent, 1, flat);
        let w_i1 = tape.param(&self.params, "gdec.init1.w");
        let b_i1 = tape.param(&self.params, "gdec.init1.b");
        let w_i2 = tape.param(&self.params, "gdec.init2.w");
        let b_i2 = tape.param(&self.params, "gdec.init2.b");
        let w_cx = tape.param(&self.params, "gdec.ctx.w");
        let b_cx = tape.param(&self.params, "gdec.ctx.b");
        let h1 = tape.matmul(z, w_i1);
        let h1 = tape.add(h1, b_i1);
        let h1 = tape.tanh(h1);
        let h2 = tape.matmul(z, w_i2);
        let h2 = tape.add(h2, b_i2);
        let h2 = tape.tanh(h2);
        let cx = tape.matmul(z, w_cx);
        let cx = tape.add(cx, b_cx);
        let cx = tape.tanh(cx);
        (h1, h2, cx)
    }

    /// One recurrent step: input row (1×(e+ctx)) and both states in,
    /// logits row and new states out.
    fn decoder_step(
        &self,
        tape: &mut Tape,
        x: NodeId,
        h1: NodeId,
        h2: NodeId,
    ) -> (NodeId, NodeId, NodeId) {
        let wx1 = tape.param(&self.params, "gdec.wx1");
        let wh1 = tape.param(&self.params, "gdec.wh1");
        let b1 = tape.param(&self.params, "gdec.b1");
        let wx2 = tape.param(&self.params, "gdec.wx2");
        let wh2 = tape.param(&self.params, "gdec.wh2");
        let b2 = tape.param(&self.params, "gdec.b2");
        let wo = tape.param(&self.params, "gdec.out.w");
        let bo = tape.param(&self.params, "gdec.out.b");

        let a1 = tape.matmul(x, wx1);
        let r1 = tape.matmul(h1, wh1);
        let s1 = tape.add(a1, r1);
        let s1 = tape.add(s1, b1);
        let n1 = tape.tanh(s1);

        let a2 = tape.matmul(n1, wx2);
        let r2 = tape.matmul(h2, wh2);
        let s2 = tape.add(a2, r2);
        let s2 = tape.add(s2, b2);
        let n2 = tape.tanh(s2);

        let logits = tape.matmul(n2, wo);
        let logits = tape.add(logits, bo);
        (logits, n1, n2)
    }

    /// Teacher-forced pass: per-position logits for predicting each next
    /// token of `tokens` from a latent. Returns the stacked logits node
    /// plus the target ids and PAD mask for the cross-entropy op.
    pub fn teacher_forced_logits(
        &self,
        tape: &mut Tape,
        latent: NodeId,
        tokens: &TokenSequence,
    ) -> (NodeId, Vec<usize>, Vec<bool>) {
        let ids = &tokens.ids;
        debug_assert!(ids.len() >= 2, "token sequence must hold BOS and EOS");
        let inputs: Vec<usize> = ids[..ids.len() - 1].iter().map(|&i| i as usize).collect();
        let targets: Vec<usize> = ids[1..].iter().map(|&i| i as usize).collect();
        let mask: Vec<bool> = targets.iter().map(|&t| t != PAD_ID as usize).collect();

        let (mut h1, mut h2, cx) = self.decoder_init(tape, latent);
        let embed = tape.param(&self.params, "gdec.embed");
        let mut logit_rows = Vec::with_capacity(inputs.len());
        for &tok in &inputs {
            let emb = tape.embed_rows(embed, vec![tok]);
            let x = tape.concat_cols(emb, cx);
            let (logits, n1, n2) = self.decoder_step(tape, x, h1, h2);
            logit_rows.push(logits);
            h1 = n1;
            h2 = n2;
        }
        let stacked = tape.stack_rows(logit_rows);
        (stacked, targets, mask)
    }

    /// Deterministic greedy decode: argmax at every step with lowest-id
    /// tie-break, stopping at EOS or after `max_len` tokens.
    pub fn greedy_decode(&self, latent: &LatentRep, max_len: usize) -> Result<Vec<u32>> {
        if max_len < 1 {
            return Err(Error::InvalidInput("greedy decode needs max_len >= 1".into()));
        }
        let mut tape = Tape::new();
        let latent_node = tape.input(latent.to_matrix());
        let (mut h1, mut h2, cx) = self.decoder_init(&mut tape, latent_node);
        let embed = tape.param(&self.params, "gdec.embed");
        let mut out = Vec::new();
        let mut prev = BOS_ID as usize;
        for _ in 0..max_len {
            let emb = tape.embed_rows(embed, vec![prev]);
            let x = tape.concat_cols(emb, cx);
            let (logits, n1, n2) = self.decoder_step(&mut tape, x, h1, h2);
            h1 = n1;
            h2 = n2;
            let row = tape.value(logits);
            let mut best = 0usize;
            let mut best_v = row.data[0];
            for (i, &v) in row.data.iter().enumerate().skip(1) {
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            if best == EOS_ID as usize {
                break;
            }
            out.push(best as u32);
            prev = best;
        }
        Ok(out)
    }

    /// Differentiable soft unroll: runs `steps` decoder steps feeding the
    /// softmax-weighted embedding forward, and returns the mean of the
    /// per-step soft token distributions (1×V).
    pub fn soft_decode_mean(&self, tape: &mut Tape, latent: NodeId, steps: usize) -> NodeId {
        debug_assert!(steps >= 1);
        let (mut h1, mut h2, cx) = self.decoder_init(tape, latent);
        let embed = tape.param(&self.params, "gdec.embed");
        let mut x_tok = tape.embed_rows(embed, vec![BOS_ID as usize]);
        let mut acc: Option<NodeId> = None;
        for _ in 0..steps {
            let x = tape.concat_cols(x_tok, cx);
            let (logits, n1, n2) = self.decoder_step(tape, x, h1, h2);
            h1 = n1;
            h2 = n2;
            let probs = tape.softmax_rows(logits);
            acc = Some(match acc {
                None => probs,
                Some(a) => tape.add(a, probs),
            });
            x_tok = tape.matmul(probs, embed);
        }
        tape.scale(acc.expect("steps >= 1"), 1.0 / steps as f64)
    }

    // ── latent mapping and sentiment ─────────────────────────────────

    /// One half of the latent mapping autoencoder applied to an S×d node.
    pub fn map_latent_on(&self, tape: &mut Tape, latent: NodeId, dir: MapDirection) -> NodeId {
        let flat = self.cfg.latent_flat();
        let (w_name, b_name) = match dir {
            MapDirection::TextToSource => ("map.fwd.w", "map.fwd.b"),
            MapDirection::SourceToText => ("map.bwd.w", "map.bwd.b"),
        };
        let w = tape.param(&self.params, w_name);
        let b = tape.param(&self.params, b_name);
        let z = tape.reshape(latent, 1, flat);
        let y = tape.matmul(z, w);
        let y = tape.add(y, b);
        tape.reshape(y, self.cfg.segments, self.cfg.latent_dim)
    }

    pub fn map_latent(&self, latent: &LatentRep, dir: MapDirection) -> Result<LatentRep> {
        if latent.len() != self.cfg.latent_flat() {
            return Err(Error::Shape(format!(
                "latent has {} values, expected {}",
                latent.len(),
                self.cfg.latent_flat()
            )));
        }
        let mut tape = Tape::new();
        let node = tape.input(latent.to_matrix());
        let mapped = self.map_latent_on(&mut tape, node, dir);
        Ok(LatentRep::from_matrix(tape.value(mapped)))
    }

    /// Sentiment head over the decoder's mean soft token distribution:
    /// two dense layers and a softmax to `classes` probabilities.
    pub fn sentiment_head_on(&self, tape: &mut Tape, mean_soft: NodeId) -> NodeId {
        let w1 = tape.param(&self.params, "sent.w1");
        let b1 = tape.param(&self.params, "sent.b1");
        let w2 = tape.param(&self.params, "sent.w2");
        let b2 = tape.param(&self.params, "sent.b2");
        let h = tape.matmul(mean_soft, w1);
        let h = tape.add(h, b1);
        let h = tape.tanh(h);
        let o = tape.matmul(h, w2);
        let o = tape.add(o, b2);
        tape.softmax_rows(o)
    }
}
