//! Seed-deterministic train/test partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::load::Dataset;
use crate::error::{Error, Result};

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    Ok(())
}

/// Partition `0..n` into train/test index sets with `|train| =
/// round(fraction·n)`. Both sides are returned in ascending order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let train_size = (fraction * n as f64).round() as usize;
    if train_size == 0 || train_size == n {
        return Err(Error::Config(format!(
            "fraction {fraction} leaves an empty side for n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train: Vec<usize> = order[..train_size].to_vec();
    let mut test: Vec<usize> = order[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// As [`split_indices`], but sampling within each label class so the two
/// sides keep (nearly) the class balance of the whole.
pub fn split_indices_stratified(
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let take = (fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "fraction {fraction} leaves an empty side for n={}",
            labels.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Split a dataset into train and test rows, deterministic in `seed`.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(data.n(), fraction, seed)?;
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn survey_sized_split_is_561_240() {
        let (train, test) = split_indices(801, 0.7, 42).unwrap();
        assert_eq!(train.len(), 561);
        assert_eq!(test.len(), 240);
    }

    #[test]
    fn same_seed_reproduces_partition() {
        let a = split_indices(100, 0.7, 9).unwrap();
        let b = split_indices(100, 0.7, 9).unwrap();
        assert_eq!(a, b);
        let c = split_indices(100, 0.7, 10).unwrap();
        assert_ne!(a, c, "different seeds should (here) differ");
    }

    #[test]
    fn degenerate_fractions_rejected() {
        assert!(split_indices(100, 0.0, 1).is_err());
        assert!(split_indices(100, 1.0, 1).is_err());
        assert!(split_indices(100, -0.3, 1).is_err());
        assert!(split_indices(100, f64::NAN, 1).is_err());
        // rounds to an empty train side
        assert!(split_indices(3, 0.1, 1).is_err());
    }

    #[test]
    fn stratified_split_preserves_class_balance() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 4 == 0) as u8).collect();
        let (train, test) = split_indices_stratified(&labels, 0.7, 5).unwrap();
        let train_pos = train.iter().filter(|&&i| labels[i] == 1).count();
        let test_pos = test.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(train_pos, 18); // round(0.7 · 25)
        assert_eq!(test_pos, 7);
        assert_eq!(train.len() + test.len(), 100);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            n in 4usize..300,
            fraction in 0.2f64..0.8,
            seed in 0u64..1000,
        ) {
            let (train, test) = split_indices(n, fraction, seed).unwrap();
            prop_assert_eq!(train.len(), (fraction * n as f64).round() as usize);
            let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
