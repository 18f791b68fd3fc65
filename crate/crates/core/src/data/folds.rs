//! Deterministic k-fold splitting.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One cross-validation fold: disjoint, exhaustive train/test id sets.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Shuffle ids with the seed and partition them into `folds` near-equal
/// test folds (sizes differ by at most one).
pub fn kfold_split(ids: &[String], folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if folds == 0 {
        return Err(Error::InvalidInput("fold count must be positive".into()));
    }
    if ids.len() < folds {
        return Err(Error::InvalidInput(format!(
            "{} ids cannot be split into {} folds",
            ids.len(),
            folds
        )));
    }
    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let base = shuffled.len() / folds;
    let extra = shuffled.len() % folds;
    let mut splits = Vec::with_capacity(folds);
    let mut start = 0usize;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        let test_ids: Vec<String> = shuffled[start..start + size].to_vec();
        let train_ids: Vec<String> = shuffled[..start]
            .iter()
            .chain(shuffled[start + size..].iter())
            .cloned()
            .collect();
        splits.push(FoldSplit { fold, train_ids, test_ids });
        start += size;
    }
    Ok(splits)
}
