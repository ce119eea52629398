use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A per-class train/test partition. Index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub per_class: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws `per_class` training samples uniformly from every class; the rest
/// form the test set.
pub fn split_per_class(labels: &[usize], classes: usize, per_class: usize, seed: u64) -> Result<SplitPlan> {
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::InvalidLabel { index: i, label: l, classes });
        }
        members[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(classes * per_class);
    let mut test = Vec::with_capacity(labels.len().saturating_sub(classes * per_class));
    for (class, mut idx) in members.into_iter().enumerate() {
        if idx.len() < per_class {
            return Err(Error::InsufficientClass { class, available: idx.len(), required: per_class });
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..per_class]);
        test.extend_from_slice(&idx[per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { per_class, seed, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_counts() {
        let labels = [0, 1, 0, 1, 0, 1, 2, 2];
        let plan = split_per_class(&labels, 3, 2, 7).unwrap();
        assert_eq!(plan.train.len(), 6);
        let mut all: Vec<usize> = plan.train.iter().chain(&plan.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        for c in 0..3 {
            assert_eq!(plan.train.iter().filter(|&&i| labels[i] == c).count(), 2);
        }
        assert!(plan.test.iter().all(|&i| labels[i] != 2));
        assert_eq!(plan, split_per_class(&labels, 3, 2, 7).unwrap());
    }

    #[test]
    fn insufficient_class() {
        assert!(matches!(
            split_per_class(&[0, 0, 1], 2, 2, 0),
            Err(Error::InsufficientClass { class: 1, available: 1, required: 2 })
        ));
    }
}
