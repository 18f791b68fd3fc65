//! Training objectives: reconstruction losses for both modalities, the
//! latent mapping loss, the group topology-preservation loss, sentiment
//! alignment, and the comparison losses (pairwise, triplet, contrastive).
//!
//! Every loss builds onto the shared tape; value-level helpers exist
//! where tests need to probe invariants directly.

use crate::error::{Error, Result};
use crate::numcore::{softmax, Matrix, NodeId, Tape};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_ALPHA: f64 = 500.0;
pub const DEFAULT_BETA: f64 = 5.0;
pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_PAIRWISE_TAU: f64 = 0.1;
pub const DEFAULT_TRIPLET_MARGIN: f64 = 0.2;
pub const DEFAULT_CONTRASTIVE_TEMPERATURE: f64 = 0.5;

/// Per-term loss values with their trade-off coefficients. The `total`
/// always satisfies the weighted-sum identity.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub m2m: f64,
    pub t2t: f64,
    pub m2t: f64,
    pub gtp: f64,
    pub sentiment: f64,
    pub reg: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub total: f64,
}

impl LossBreakdown {
    #[allow(clippy::too_many_arguments)]
    pub fn compose(
        m2m: f64,
        t2t: f64,
        m2t: f64,
        gtp: f64,
        sentiment: f64,
        reg: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<LossBreakdown> {
        for (name, c) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if c < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {c}")));
            }
        }
        let total = m2m + t2t + m2t + alpha * gtp + beta * sentiment + gamma * reg;
        Ok(LossBreakdown { m2m, t2t, m2t, gtp, sentiment, reg, alpha, beta, gamma, total })
    }

    /// Mean of several breakdowns (batch averaging).
    pub fn mean(parts: &[LossBreakdown]) -> LossBreakdown {
        if parts.is_empty() {
            return LossBreakdown::default();
        }
        let n = parts.len() as f64;
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            out.m2m += p.m2m;
            out.t2t += p.t2t;
            out.m2t += p.m2t;
            out.gtp += p.gtp;
            out.sentiment += p.sentiment;
            out.reg += p.reg;
            out.total += p.total;
        }
        out.m2m /= n;
        out.t2t /= n;
        out.m2t /= n;
        out.gtp /= n;
        out.sentiment /= n;
        out.reg /= n;
        out.total /= n;
        out
    }
}

/// Squared Frobenius reconstruction error between a feature matrix and
/// its reconstruction (summed, not averaged).
pub fn music_recon_loss(tape: &mut Tape, features: NodeId, recon: NodeId) -> Result<NodeId> {
    let (fa, fb) = (tape.value(features).shape(), tape.value(recon).shape());
    if fa != fb {
        return Err(Error::Shape(format!("recon loss shapes {fa:?} vs {fb:?}")));
    }
    Ok(tape.sq_dist(features, recon))
}

/// Mean token-level cross-entropy of teacher-forced logits, PAD masked.
pub fn text_recon_loss(
    tape: &mut Tape,
    logits: NodeId,
    targets: Vec<usize>,
    mask: Vec<bool>,
) -> Result<NodeId> {
    let rows = tape.value(logits).rows;
    if rows != targets.len() || rows != mask.len() {
        return Err(Error::Shape(format!(
            "teacher-forced logits have {rows} positions, targets {}",
            targets.len()
        )));
    }
    Ok(tape.cross_entropy_masked(logits, targets, mask))
}

/// Squared distance between the source latent and the mapped text latent.
pub fn latent_map_loss(tape: &mut Tape, source_latent: NodeId, mapped: NodeId) -> Result<NodeId> {
    let (a, b) = (tape.value(source_latent).shape(), tape.value(mapped).shape());
    if a != b {
        return Err(Error::Shape(format!("latent map loss shapes {a:?} vs {b:?}")));
    }
    Ok(tape.sq_dist(source_latent, mapped))
}

/// Group topology-preservation loss against a detached group reference.
///
/// The source profile is the softmax over cosine similarities between the
/// anchor latent (a live tape node) and each queue latent; the target
/// profile is the softmax over the supplied text similarities. Queue
/// latents enter as detached constants and the text profile is a
/// constant, so gradient flows only through the anchor.
pub fn gtp_loss(
    tape: &mut Tape,
    anchor_latent: NodeId,
    queue_latents: &[&[f64]],
    text_sims: &[f64],
) -> Result<NodeId> {
    if queue_latents.is_empty() {
        return Err(Error::InvalidInput("topology group must be non-empty".into()));
    }
    if queue_latents.len() != text_sims.len() {
        return Err(Error::Shape(format!(
            "group has {} latents but {} text similarities",
            queue_latents.len(),
            text_sims.len()
        )));
    }
    let mut cos_nodes = Vec::with_capacity(queue_latents.len());
    for q in queue_latents {
        let qn = tape.constant(Matrix::row_vector(q.to_vec()));
        cos_nodes.push(tape.cosine(anchor_latent, qn)?);
    }
    let stacked = tape.stack_scalars(cos_nodes);
    let source_profile = tape.softmax_rows(stacked);
    let target_profile = tape.constant(Matrix::row_vector(softmax(text_sims)?));
    Ok(tape.sq_dist(source_profile, target_profile))
}

/// Value-level topology distance from raw similarity vectors:
/// ‖softmax(cos) − softmax(text)‖². The similarity-level surface for
/// invariance tests and forward cross-checks.
pub fn gtp_value_from_sims(cos_sims: &[f64], text_sims: &[f64]) -> Result<f64> {
    if cos_sims.len() != text_sims.len() {
        return Err(Error::Shape(format!(
            "similarity vectors differ: {} vs {}",
            cos_sims.len(),
            text_sims.len()
        )));
    }
    let a = softmax(cos_sims)?;
    let b = softmax(text_sims)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Squared distance between a target distribution and the predicted one.
pub fn sentiment_loss(tape: &mut Tape, target: &[f64], predicted: NodeId) -> Result<NodeId> {
    let p = tape.value(predicted);
    if target.len() != 7 || p.numel() != 7 {
        return Err(Error::Shape(format!(
            "sentiment distributions must have 7 classes, got {} and {}",
            target.len(),
            p.numel()
        )));
    }
    let t = tape.constant(Matrix::row_vector(target.to_vec()));
    Ok(tape.sq_dist(t, predicted))
}

/// Margin hinge over squared distances: max(0, ‖a−p‖² − ‖a−n‖² + margin).
pub fn triplet_loss(
    tape: &mut Tape,
    anchor: NodeId,
    positive: NodeId,
    negative: NodeId,
    margin: f64,
) -> Result<NodeId> {
    let a = tape.value(anchor).numel();
    if tape.value(positive).numel() != a || tape.value(negative).numel() != a {
        return Err(Error::Shape("triplet latents must share dimensions".into()));
    }
    let d_ap = tape.sq_dist(anchor, positive);
    let d_an = tape.sq_dist(anchor, negative);
    let diff = tape.sub(d_ap, d_an);
    let shifted = tape.add_const(diff, margin);
    Ok(tape.relu(shifted))
}

/// Pull gate: ‖a−b‖² when the pair's text similarity reaches τ, else no
/// contribution (None).
pub fn pairwise_loss(
    tape: &mut Tape,
    a: NodeId,
    b: NodeId,
    text_sim: f64,
    tau: f64,
) -> Result<Option<NodeId>> {
    if tape.value(a).shape() != tape.value(b).shape() {
        return Err(Error::Shape("pairwise latents must share shape".into()));
    }
    if text_sim >= tau {
        Ok(Some(tape.sq_dist(a, b)))
    } else {
        Ok(None)
    }
}

/// NT-Xent: −log( exp(cos(z, z⁺)/T) / Σ_{c ∈ {z⁺} ∪ negatives} exp(cos(z, c)/T) ).
pub fn contrastive_loss(
    tape: &mut Tape,
    z: NodeId,
    z_pos: NodeId,
    negatives: &[NodeId],
    temperature: f64,
) -> Result<NodeId> {
    if negatives.is_empty() {
        return Err(Error::InvalidInput("contrastive loss needs at least one negative".into()));
    }
    if temperature <= 0.0 {
        return Err(Error::InvalidConfig(format!("temperature must be > 0, got {temperature}")));
    }
    let pos = tape.cosine(z, z_pos)?;
    let mut sims = vec![pos];
    for n in negatives {
        sims.push(tape.cosine(z, *n)?);
    }
    let stacked = tape.stack_scalars(sims);
    let scaled = tape.scale(stacked, 1.0 / temperature);
    let lse = tape.log_sum_exp(scaled);
    let pos_scaled = tape.scale(pos, 1.0 / temperature);
    Ok(tape.sub(lse, pos_scaled))
}

/// Feature-space augmentation for the contrastive variant: additive
/// noise, a random time-axis mask, and global scale jitter.
pub fn augment_features(features: &Matrix, rng: &mut ChaCha8Rng) -> Matrix {
    let (bins, frames) = features.shape();
    let scale = 1.0 + rng.gen_range(-0.05..0.05);
    let mask_len = (frames as f64 * 0.1).ceil() as usize;
    let mask_start = rng.gen_range(0..frames.saturating_sub(mask_len).max(1));
    let mut out = features.clone();
    for b in 0..bins {
        for t in 0..frames {
            let idx = b * frames + t;
            let masked = t >= mask_start && t < mask_start + mask_len;
            let noise = 0.01 * rng.gen_range(-1.0..1.0);
            out.data[idx] = if masked { 0.0 } else { scale * out.data[idx] + noise };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_check, ParamStore};
    use rand::SeedableRng;

    fn row(values: &[f64]) -> Matrix {
        Matrix::row_vector(values.to_vec())
    }

    #[test]
    fn music_recon_zero_at_identity_and_single_entry() {
        let mut tape = Tape::new();
        let m = tape.input(Matrix::from_vec(1, 2, vec![1.0, 0.0]));
        let same = tape.input(Matrix::from_vec(1, 2, vec![1.0, 0.0]));
        let zero = music_recon_loss(&mut tape, m, same).unwrap();
        assert_eq!(tape.scalar(zero), 0.0);

        let r = tape.input(Matrix::from_vec(1, 2, vec![0.0, 0.0]));
        let one = music_recon_loss(&mut tape, m, r).unwrap();
        assert_eq!(tape.scalar(one), 1.0);
    }

    #[test]
    fn music_recon_matches_elementwise_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let oracle: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        let mut tape = Tape::new();
        let ma = tape.input(Matrix::from_vec(3, 4, a));
        let mb = tape.input(Matrix::from_vec(3, 4, b));
        let loss = music_recon_loss(&mut tape, ma, mb).unwrap();
        assert!((tape.scalar(loss) - oracle).abs() < 1e-12);
    }

    #[test]
    fn music_recon_rejects_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::zeros(2, 3));
        let b = tape.input(Matrix::zeros(3, 2));
        assert!(matches!(music_recon_loss(&mut tape, a, b), Err(Error::Shape(_))));
    }

    #[test]
    fn text_recon_uniform_logits_is_log_vocab() {
        let vocab = 11usize;
        let mut tape = Tape::new();
        let logits = tape.input(Matrix::zeros(3, vocab));
        let loss =
            text_recon_loss(&mut tape, logits, vec![1, 2, 3], vec![true, true, true]).unwrap();
        assert!((tape.scalar(loss) - (vocab as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn text_recon_confident_correct_logits_near_zero() {
        let mut tape = Tape::new();
        let mut m = Matrix::zeros(2, 4);
        *m.at_mut(0, 1) = 50.0;
        *m.at_mut(1, 3) = 50.0;
        let logits = tape.input(m);
        let loss = text_recon_loss(&mut tape, logits, vec![1, 3], vec![true, true]).unwrap();
        assert!(tape.scalar(loss) < 1e-12);
    }

    #[test]
    fn text_recon_hand_computed_two_token_case() {
        // 3-class logits (1, 0, -1) per position; targets 0 then 2.
        // loss = mean(lse - logit_target), lse = ln(e^1 + e^0 + e^-1).
        let lse = (1f64.exp() + 1.0 + (-1f64).exp()).ln();
        let expected = ((lse - 1.0) + (lse + 1.0)) / 2.0;
        let mut tape = Tape::new();
        let logits = tape.input(Matrix::from_vec(2, 3, vec![1.0, 0.0, -1.0, 1.0, 0.0, -1.0]));
        let loss = text_recon_loss(&mut tape, logits, vec![0, 2], vec![true, true]).unwrap();
        assert!((tape.scalar(loss) - expected).abs() < 1e-12);
    }

    #[test]
    fn text_recon_masks_pad_positions() {
        let mut tape = Tape::new();
        let mut m = Matrix::zeros(2, 4);
        *m.at_mut(0, 1) = 50.0;
        // second position is wildly wrong but masked out
        *m.at_mut(1, 0) = 50.0;
        let logits = tape.input(m);
        let loss = text_recon_loss(&mut tape, logits, vec![1, 3], vec![true, false]).unwrap();
        assert!(tape.scalar(loss) < 1e-12);
    }

    #[test]
    fn latent_map_loss_trivial_cases() {
        let mut tape = Tape::new();
        let a = tape.input(row(&[0.5, 0.5]));
        let same = tape.input(row(&[0.5, 0.5]));
        let l = latent_map_loss(&mut tape, a, same).unwrap();
        assert_eq!(tape.scalar(l), 0.0);
        let unit_apart = tape.input(row(&[1.5, 0.5]));
        let l = latent_map_loss(&mut tape, a, unit_apart).unwrap();
        assert_eq!(tape.scalar(l), 1.0);
    }

    #[test]
    fn gtp_matched_topologies_is_zero() {
        // cosine similarities equal text similarities → profiles match.
        let anchor = vec![1.0, 0.0];
        let q1 = vec![1.0, 0.0]; // cos = 1
        let q2 = vec![0.0, 1.0]; // cos = 0
        let mut tape = Tape::new();
        let a = tape.input(row(&anchor));
        let loss = gtp_loss(&mut tape, a, &[&q1, &q2], &[1.0, 0.0]).unwrap();
        assert!(tape.scalar(loss) < 1e-12);
    }

    #[test]
    fn gtp_hand_value() {
        // equal cosines vs text sims (0.2, 0.8):
        // ‖(0.5,0.5) − (0.35434,0.64566)‖² = 0.04243
        let v = gtp_value_from_sims(&[0.5, 0.5], &[0.2, 0.8]).unwrap();
        assert!((v - 0.04243).abs() < 1e-4);
    }

    #[test]
    fn gtp_tape_forward_matches_value_helper() {
        let anchor = vec![0.6, 0.8, 0.0];
        let group: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.5, 0.7],
        ];
        let text_sims = [0.12, 0.5, 0.03];
        let cos: Vec<f64> = group
            .iter()
            .map(|g| crate::simkernel::cosine(&anchor, g).unwrap())
            .collect();
        let expected = gtp_value_from_sims(&cos, &text_sims).unwrap();
        let mut tape = Tape::new();
        let a = tape.input(row(&anchor));
        let refs: Vec<&[f64]> = group.iter().map(|g| g.as_slice()).collect();
        let loss = gtp_loss(&mut tape, a, &refs, &text_sims).unwrap();
        assert!((tape.scalar(loss) - expected).abs() < 1e-12);
    }

    #[test]
    fn gtp_group_permutation_invariance() {
        let anchor = vec![0.9, 0.1, 0.3];
        let group: Vec<Vec<f64>> = vec![
            vec![1.0, 0.2, 0.0],
            vec![0.1, 1.0, 0.4],
            vec![0.3, 0.3, 1.0],
        ];
        let sims = [0.4, 0.1, 0.25];
        let run = |order: [usize; 3]| {
            let mut tape = Tape::new();
            let a = tape.input(row(&anchor));
            let refs: Vec<&[f64]> = order.iter().map(|&i| group[i].as_slice()).collect();
            let s: Vec<f64> = order.iter().map(|&i| sims[i]).collect();
            let loss = gtp_loss(&mut tape, a, &refs, &s).unwrap();
            tape.scalar(loss)
        };
        let base = run([0, 1, 2]);
        assert!((run([2, 0, 1]) - base).abs() < 1e-12);
        assert!((run([1, 2, 0]) - base).abs() < 1e-12);
    }

    #[test]
    fn gtp_constant_shift_invariance_on_cosine_side() {
        let cos = [0.1, 0.5, -0.2, 0.3];
        let text = [0.9, 0.0, 0.4, 0.2];
        let base = gtp_value_from_sims(&cos, &text).unwrap();
        let shifted: Vec<f64> = cos.iter().map(|c| c + 0.77).collect();
        let moved = gtp_value_from_sims(&shifted, &text).unwrap();
        assert!((moved - base).abs() < 1e-10);
    }

    #[test]
    fn gtp_queue_entries_get_exact_zero_gradient() {
        let anchor = vec![0.5, 0.4, -0.3];
        let q1 = vec![0.9, 0.1, 0.2];
        let q2 = vec![-0.2, 0.8, 0.5];
        let mut tape = Tape::new();
        let a = tape.input(row(&anchor));
        let loss = gtp_loss(&mut tape, a, &[&q1, &q2], &[0.2, 0.7]).unwrap();
        tape.backward(loss).unwrap();
        // anchor gets gradient; the constants behind the queue entries are
        // nodes a+1 and a+2 by construction order — verify via fresh
        // reconstruction instead of relying on ids: rebuild and inspect.
        assert!(tape.grad(a).data.iter().any(|v| *v != 0.0));
        // queue constants were pushed immediately after `a`
        assert!(tape.grad(a + 1).data.iter().all(|v| *v == 0.0));
        assert!(tape.grad(a + 3).data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gtp_rejects_empty_group() {
        let mut tape = Tape::new();
        let a = tape.input(row(&[1.0, 0.0]));
        assert!(matches!(gtp_loss(&mut tape, a, &[], &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sentiment_loss_trivial_cases() {
        let target = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let mut tape = Tape::new();
        let same = tape.input(row(&target));
        let l = sentiment_loss(&mut tape, &target, same).unwrap();
        assert_eq!(tape.scalar(l), 0.0);

        let disjoint = tape.input(row(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let l = sentiment_loss(&mut tape, &target, disjoint).unwrap();
        assert_eq!(tape.scalar(l), 2.0);
    }

    #[test]
    fn sentiment_loss_rejects_wrong_length() {
        let mut tape = Tape::new();
        let p = tape.input(row(&[0.5, 0.5]));
        assert!(matches!(
            sentiment_loss(&mut tape, &[0.5, 0.5], p),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn triplet_loss_cases() {
        let mut tape = Tape::new();
        let a = tape.input(row(&[1.0, 0.0]));
        let p = tape.input(row(&[1.0, 0.0]));
        let n = tape.input(row(&[5.0, 5.0]));
        let l = triplet_loss(&mut tape, a, p, n, 0.0).unwrap();
        assert_eq!(tape.scalar(l), 0.0);

        // equal distances with margin 0.2 → 0.2
        let p2 = tape.input(row(&[1.0, 1.0]));
        let n2 = tape.input(row(&[1.0, -1.0]));
        let l = triplet_loss(&mut tape, a, p2, n2, 0.2).unwrap();
        assert!((tape.scalar(l) - 0.2).abs() < 1e-12);

        // d_ap² = 1, d_an² = 4, margin 1 → max(0, −2) = 0
        let p3 = tape.input(row(&[2.0, 0.0]));
        let n3 = tape.input(row(&[3.0, 0.0]));
        let l = triplet_loss(&mut tape, a, p3, n3, 1.0).unwrap();
        assert_eq!(tape.scalar(l), 0.0);
    }

    #[test]
    fn pairwise_loss_gating() {
        let mut tape = Tape::new();
        let a = tape.input(row(&[1.0, 0.0]));
        let b = tape.input(row(&[0.0, 0.0]));
        assert!(pairwise_loss(&mut tape, a, b, 0.05, 0.1).unwrap().is_none());
        let l = pairwise_loss(&mut tape, a, b, 0.5, 0.1).unwrap().unwrap();
        assert_eq!(tape.scalar(l), 1.0);
        let same = tape.input(row(&[1.0, 0.0]));
        let l = pairwise_loss(&mut tape, a, same, 0.5, 0.1).unwrap().unwrap();
        assert_eq!(tape.scalar(l), 0.0);
    }

    #[test]
    fn contrastive_hand_value() {
        // z⁺ = z, one orthogonal negative, T = 1 → −log(e/(e+1)) = 0.31326
        let mut tape = Tape::new();
        let z = tape.input(row(&[1.0, 0.0]));
        let zp = tape.input(row(&[1.0, 0.0]));
        let n = tape.input(row(&[0.0, 1.0]));
        let l = contrastive_loss(&mut tape, z, zp, &[n], 1.0).unwrap();
        assert!((tape.scalar(l) - 0.3132616875182228).abs() < 1e-12);
    }

    #[test]
    fn contrastive_identical_candidates_is_log_count() {
        let mut tape = Tape::new();
        let z = tape.input(row(&[1.0, 1.0]));
        let zp = tape.input(row(&[1.0, 1.0]));
        let negs: Vec<NodeId> = (0..3).map(|_| tape.input(row(&[1.0, 1.0]))).collect();
        let l = contrastive_loss(&mut tape, z, zp, &negs, 1.0).unwrap();
        assert!((tape.scalar(l) - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn contrastive_is_positive_and_validates() {
        let mut tape = Tape::new();
        let z = tape.input(row(&[1.0, 0.2]));
        let zp = tape.input(row(&[0.9, 0.3]));
        let n = tape.input(row(&[-1.0, 0.4]));
        let l = contrastive_loss(&mut tape, z, zp, &[n], 0.5).unwrap();
        assert!(tape.scalar(l) > 0.0);
        assert!(matches!(contrastive_loss(&mut tape, z, zp, &[], 0.5), Err(Error::InvalidInput(_))));
        assert!(matches!(
            contrastive_loss(&mut tape, z, zp, &[n], 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn breakdown_identity_and_defaults() {
        let b = LossBreakdown::compose(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA).unwrap();
        assert_eq!(b.total, 0.0);
        assert_eq!(b.alpha, 500.0);
        assert_eq!(b.beta, 5.0);
        assert_eq!(b.gamma, 0.25);

        let b = LossBreakdown::compose(0.3, 1.1, 0.2, 0.01, 0.4, 2.0, 500.0, 5.0, 0.25).unwrap();
        let expect = 0.3 + 1.1 + 0.2 + 500.0 * 0.01 + 5.0 * 0.4 + 0.25 * 2.0;
        assert!((b.total - expect).abs() < 1e-10);

        assert!(matches!(
            LossBreakdown::compose(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 5.0, 0.25),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn gtp_gradient_matches_finite_differences() {
        let mut params = ParamStore::new();
        params.insert("anchor", row(&[0.4, -0.2, 0.9, 0.3]));
        let q1 = vec![0.2, 0.5, -0.1, 0.8];
        let q2 = vec![-0.6, 0.1, 0.4, 0.2];
        let q3 = vec![0.3, 0.3, 0.3, -0.9];
        let report = finite_diff_check(
            |tape, params| {
                let a = tape.param(params, "anchor");
                gtp_loss(tape, a, &[&q1, &q2, &q3], &[0.3, 0.1, 0.6])
            },
            &mut params,
            1e-6,
            1e-5,
        )
        .unwrap();
        assert!(report.passed, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn every_loss_nonnegative_on_random_inputs() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let dim = rng.gen_range(2..6);
            let v = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..dim).map(|_| rng.gen_range(-1.0..1.0) + 0.1).collect()
            };
            let mut tape = Tape::new();
            let a = tape.input(row(&v(&mut rng)));
            let b = tape.input(row(&v(&mut rng)));
            let c = tape.input(row(&v(&mut rng)));
            let l = triplet_loss(&mut tape, a, b, c, 0.2).unwrap();
            assert!(tape.scalar(l) >= 0.0);
            let l = contrastive_loss(&mut tape, a, b, &[c], 0.5).unwrap();
            assert!(tape.scalar(l) > 0.0);
            let l = tape.sq_dist(a, b);
            assert!(tape.scalar(l) >= 0.0);
        }
    }
}
