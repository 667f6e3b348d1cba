use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Held-out indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.folds.iter().enumerate().filter(|(f, _)| *f != fold).flat_map(|(_, idx)| idx.iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Folds are pairwise disjoint and cover `0..n`.
    pub fn check_partition(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for idx in self.folds.iter().flatten() {
            if *idx >= n || seen[*idx] {
                return false;
            }
            seen[*idx] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Per class, shuffle with the seed and deal round-robin into `k` folds.
/// Negatives continue dealing where the positives stopped so fold sizes
/// differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for class in [true, false] {
        let mut idx: Vec<usize> = labels.iter().enumerate().filter(|(_, &y)| y == class).map(|(i, _)| i).collect();
        if idx.len() < k {
            return Err(EvalError::ClassTooSmall { class, count: idx.len(), k });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}
