use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// `state <- 6364136223846793005 * state + 1442695040888963407 (mod 2^64)`;
/// draws use the top 31 bits. Used for every shuffle so partitions and epoch
/// orders are reproducible on any platform.
#[derive(Debug, Clone)]
pub struct Lcg(u64);

impl Lcg {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(Self::MULTIPLIER).wrapping_add(Self::INCREMENT);
        self.0
    }

    /// Uniform-ish integer in `0..bound` (top 31 bits modulo `bound`).
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() >> 33) % bound as u64) as usize
    }

    /// Fisher-Yates from the last element down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// `n_partitions` random train/test splits; partition `k` shuffles with
/// seed `base_seed + k` and puts the first `round(train_fraction * n)` ids in
/// the training set (at least one id on each side).
pub fn make_partitions(
    ids: &[String],
    n_partitions: usize,
    train_fraction: f64,
    base_seed: u64,
) -> Result<Vec<Partition>> {
    if ids.is_empty() {
        return Err(Error::Argument("cannot partition an empty id list".into()));
    }
    if n_partitions == 0 {
        return Err(Error::Argument("need at least one partition".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    if ids.len() < 2 {
        return Err(Error::Argument("need at least two ids for a train/test split".into()));
    }
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    Ok((0..n_partitions as u64)
        .map(|k| {
            let seed = base_seed + k;
            let mut order = ids.to_vec();
            Lcg::new(seed).shuffle(&mut order);
            let test_ids = order.split_off(n_train);
            Partition { seed, train_ids: order, test_ids }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i:03}")).collect()
    }

    #[test]
    fn eighty_twenty_split() {
        for p in make_partitions(&ids(10), 10, 0.8, 0).unwrap() {
            assert_eq!((p.train_ids.len(), p.test_ids.len()), (8, 2));
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let a = make_partitions(&ids(30), 3, 0.7, 5).unwrap();
        let b = make_partitions(&ids(30), 3, 0.7, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partitions_differ_across_seeds() {
        let parts = make_partitions(&ids(100), 10, 0.8, 0).unwrap();
        let distinct: BTreeSet<Vec<String>> = parts
            .into_iter()
            .map(|p| {
                let mut t = p.test_ids;
                t.sort();
                t
            })
            .collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn bad_arguments() {
        assert!(make_partitions(&[], 10, 0.8, 0).is_err());
        assert!(make_partitions(&ids(10), 10, 1.0, 0).is_err());
        assert!(make_partitions(&ids(10), 0, 0.5, 0).is_err());
    }

    #[test]
    fn lcg_sequence_is_pinned() {
        let mut lcg = Lcg::new(0);
        assert_eq!(lcg.next_u64(), 1442695040888963407);
        assert_eq!(lcg.next_u64(), 1876011003808476466);
    }

    proptest! {
        #[test]
        fn partitions_cover_and_are_disjoint(n in 2usize..60, frac in 0.05f64..0.95, seed in 0u64..1000) {
            let all = ids(n);
            for p in make_partitions(&all, 2, frac, seed).unwrap() {
                let train: BTreeSet<_> = p.train_ids.iter().collect();
                let test: BTreeSet<_> = p.test_ids.iter().collect();
                prop_assert!(train.is_disjoint(&test));
                prop_assert_eq!(train.len() + test.len(), n);
            }
        }
    }
}
