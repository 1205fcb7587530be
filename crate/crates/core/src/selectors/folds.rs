use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random V-fold partition of `0..n`. Fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    labels: Vec<usize>,
    folds: usize,
    seed: u64,
}

impl FoldAssignment {
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::Domain(format!("need at least 2 folds, got {folds}")));
        }
        if n < folds {
            return Err(Error::InsufficientData { needed: folds, got: n });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut labels = vec![0; n];
        for (position, &row) in order.iter().enumerate() {
            labels[row] = position % folds;
        }
        Ok(Self { labels, folds, seed })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] != fold).collect()
    }

    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == fold).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn folds_are_balanced_and_deterministic(n in 2usize..200, v in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= v);
            let f = FoldAssignment::new(n, v, seed).unwrap();
            let mut sizes = vec![0usize; v];
            for &l in f.labels() {
                sizes[l] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(*lo >= 1);
            prop_assert!(hi - lo <= 1);
            prop_assert_eq!(f, FoldAssignment::new(n, v, seed).unwrap());
        }
    }

    #[test]
    fn rejects_bad_fold_counts() {
        assert!(FoldAssignment::new(10, 1, 0).is_err());
        assert!(FoldAssignment::new(3, 5, 0).is_err());
    }
}
