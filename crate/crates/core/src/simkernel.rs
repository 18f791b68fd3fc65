//! Cosine similarity, pairwise similarity matrices, and softmax-normalized
//! topology vectors over a group reference.

use crate::error::{Error, Result};
use crate::numcore::{softmax, Matrix};
use crate::textmetric::{BleuConfig, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Source,
    Target,
}

/// Softmax-normalized similarity profile of an anchor against a group
/// reference. Sums to 1; length equals the group size.
#[derive(Debug, Clone)]
pub struct TopologyVector {
    pub probabilities: Vec<f64>,
    pub modality: Modality,
}

impl TopologyVector {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Cosine similarity of two equal-length vectors, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine operands differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm { index: None });
    }
    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Pairwise cosine matrix over representation vectors: symmetric with a
/// unit diagonal. A zero-norm representation is rejected with its index.
pub fn pairwise_cosine_matrix(reps: &[Vec<f64>]) -> Result<Matrix> {
    pairwise_cosine_rows(reps, true)
}

/// Sequential reference path for the pairwise cosine matrix.
pub fn pairwise_cosine_matrix_seq(reps: &[Vec<f64>]) -> Result<Matrix> {
    pairwise_cosine_rows(reps, false)
}

fn pairwise_cosine_rows(reps: &[Vec<f64>], parallel: bool) -> Result<Matrix> {
    if reps.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise_cosine_matrix needs at least 2 representations, got {}",
            reps.len()
        )));
    }
    for (i, r) in reps.iter().enumerate() {
        if r.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return Err(Error::ZeroNorm { index: Some(i) });
        }
    }
    let n = reps.len();
    // Upper triangle per row, mirrored afterwards for exact symmetry.
    let rows: Vec<Vec<f64>> = crate::par::map_indices(n, parallel, |i| {
        ((i + 1)..n)
            .map(|j| cosine(&reps[i], &reps[j]).expect("norms already checked"))
            .collect()
    });
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m.data[i * n + i] = 1.0;
        for (off, &v) in rows[i].iter().enumerate() {
            let j = i + 1 + off;
            m.data[i * n + j] = v;
            m.data[j * n + i] = v;
        }
    }
    Ok(m)
}

/// Source-modality topology: softmax over cosine similarities between the
/// anchor and each group member.
pub fn source_topology(anchor: &[f64], group: &[&[f64]]) -> Result<TopologyVector> {
    if group.is_empty() {
        return Err(Error::InvalidInput("topology group must be non-empty".into()));
    }
    let sims: Result<Vec<f64>> = group.iter().map(|g| cosine(anchor, g)).collect();
    Ok(TopologyVector { probabilities: softmax(&sims?)?, modality: Modality::Source })
}

/// Target-modality topology: softmax over sentence-BLEU similarities with
/// the anchor text as hypothesis.
pub fn target_topology(
    anchor: &TokenSequence,
    group: &[&TokenSequence],
    cfg: &BleuConfig,
) -> Result<TopologyVector> {
    if group.is_empty() {
        return Err(Error::InvalidInput("topology group must be non-empty".into()));
    }
    let sims: Vec<f64> = group.iter().map(|g| cfg.score(anchor, g)).collect();
    Ok(TopologyVector { probabilities: softmax(&sims)?, modality: Modality::Target })
}

pub const HISTOGRAM_BINS: usize = 40;

/// Statistics over the strictly off-diagonal entries of a square
/// similarity matrix, with a 40-bin histogram over [-1, 1].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpreadStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// (bin_left, bin_right, count) over [-1, 1].
    pub histogram: Vec<(f64, f64, usize)>,
}

pub fn similarity_spread_stats(matrix: &Matrix) -> Result<SpreadStats> {
    if matrix.rows != matrix.cols {
        return Err(Error::InvalidInput(format!(
            "spread stats need a square matrix, got {}x{}",
            matrix.rows, matrix.cols
        )));
    }
    if matrix.rows < 2 {
        return Err(Error::InvalidInput("spread stats need at least a 2x2 matrix".into()));
    }
    let n = matrix.rows;
    let mut values = Vec::with_capacity(n * n - n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values.push(matrix.at(i, j));
            }
        }
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let width = 2.0 / HISTOGRAM_BINS as f64;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for v in &values {
        let idx = (((v + 1.0) / width).floor() as isize).clamp(0, HISTOGRAM_BINS as isize - 1);
        counts[idx as usize] += 1;
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (-1.0 + i as f64 * width, -1.0 + (i + 1) as f64 * width, c))
        .collect();

    Ok(SpreadStats { mean, std: var.sqrt(), min, max, histogram })
}

/// Histogram rows as CSV: `bin_left,bin_right,count`.
pub fn histogram_csv(stats: &SpreadStats) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (l, r, c) in &stats.histogram {
        out.push_str(&format!("{l},{r},{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let u = vec![0.4, -1.2, 3.3];
        assert_eq!(cosine(&u, &u).unwrap(), 1.0);
    }

    #[test]
    fn cosine_orthogonal_is_zero() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_value() {
        let got = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((got - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn cosine_rejects_zero_vector() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn pairwise_identical_reps_all_ones() {
        let reps = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let m = pairwise_cosine_matrix(&reps).unwrap();
        assert!(m.data.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn pairwise_zero_rep_reports_index() {
        let reps = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        match pairwise_cosine_matrix(&reps) {
            Err(Error::ZeroNorm { index: Some(1) }) => {}
            other => panic!("expected ZeroNorm at index 1, got {other:?}"),
        }
    }

    #[test]
    fn pairwise_diagonal_exactly_one_and_symmetric() {
        let reps = vec![vec![1.0, 0.2], vec![-0.4, 1.0], vec![0.9, 0.9]];
        let m = pairwise_cosine_matrix(&reps).unwrap();
        for i in 0..3 {
            assert_eq!(m.at(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(m.at(i, j), m.at(j, i));
            }
        }
    }

    #[test]
    fn pairwise_par_matches_seq_bitwise() {
        let reps: Vec<Vec<f64>> =
            (0..12).map(|i| (0..8).map(|j| ((i * 13 + j * 7) % 11) as f64 - 5.0 + 0.1).collect()).collect();
        let a = pairwise_cosine_matrix(&reps).unwrap();
        let b = pairwise_cosine_matrix_seq(&reps).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn topology_equal_similarities_is_uniform() {
        let anchor = vec![1.0, 0.0];
        let g1 = vec![0.0, 1.0];
        let g2 = vec![0.0, -1.0];
        let t = source_topology(&anchor, &[&g1, &g2]).unwrap();
        assert_eq!(t.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn topology_hand_softmax_case() {
        // cosines 0.2 and 0.8 → softmax (0.35434, 0.64566)
        let anchor = vec![1.0, 0.0];
        let a = (0.2f64).acos();
        let b = (0.8f64).acos();
        let g1 = vec![a.cos(), a.sin()];
        let g2 = vec![b.cos(), b.sin()];
        let t = source_topology(&anchor, &[&g1, &g2]).unwrap();
        assert!((t.probabilities[0] - 0.35434).abs() < 1e-4);
        assert!((t.probabilities[1] - 0.64566).abs() < 1e-4);
    }

    #[test]
    fn topology_rejects_empty_group() {
        assert!(matches!(
            source_topology(&[1.0], &[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn topology_length_matches_group_size() {
        let anchor = vec![1.0, 0.5, 0.2];
        let members: Vec<Vec<f64>> =
            (0..31).map(|i| vec![1.0, 0.01 * i as f64, -0.02 * i as f64 + 0.1]).collect();
        let refs: Vec<&[f64]> = members.iter().map(|m| m.as_slice()).collect();
        let t = source_topology(&anchor, &refs).unwrap();
        assert_eq!(t.len(), 31);
        let sum: f64 = t.probabilities.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spread_stats_all_ones() {
        let m = Matrix::from_vec(3, 3, vec![1.0; 9]);
        let s = similarity_spread_stats(&m).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 1.0);
    }

    #[test]
    fn spread_stats_two_by_two_range() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.4, -0.05, 1.0]);
        let s = similarity_spread_stats(&m).unwrap();
        assert_eq!(s.min, -0.05);
        assert_eq!(s.max, 0.4);
    }

    #[test]
    fn spread_stats_identity_matrix_mean_zero() {
        let mut m = Matrix::zeros(4, 4);
        for i in 0..4 {
            *m.at_mut(i, i) = 1.0;
        }
        let s = similarity_spread_stats(&m).unwrap();
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn spread_stats_rejects_tiny_matrix() {
        let m = Matrix::from_vec(1, 1, vec![1.0]);
        assert!(matches!(similarity_spread_stats(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn histogram_has_forty_bins_and_counts_everything() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.3, -0.7, 1.0]);
        let s = similarity_spread_stats(&m).unwrap();
        assert_eq!(s.histogram.len(), HISTOGRAM_BINS);
        let total: usize = s.histogram.iter().map(|(_, _, c)| c).sum();
        assert_eq!(total, 2);
        let csv = histogram_csv(&s);
        assert!(csv.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(csv.lines().count(), HISTOGRAM_BINS + 1);
    }
}
