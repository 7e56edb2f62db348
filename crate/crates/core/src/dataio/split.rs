use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Class-disjoint train/test partition of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_classes: Vec<usize>,
    pub test_classes: Vec<usize>,
}

/// Picks `n_test_classes` of the `n_classes` ids uniformly at random as the
/// test set. Both lists come back sorted.
pub fn class_disjoint_split(n_classes: usize, n_test_classes: usize, seed: u64) -> Result<SplitSpec> {
    if n_test_classes == 0 || n_test_classes >= n_classes {
        return Err(Error::invalid(format!(
            "test class count {n_test_classes} must be in 1..{n_classes}"
        )));
    }
    let perm = SeededRng::new(seed).permutation(n_classes);
    let mut test_classes = perm[..n_test_classes].to_vec();
    let mut train_classes = perm[n_test_classes..].to_vec();
    test_classes.sort_unstable();
    train_classes.sort_unstable();
    Ok(SplitSpec {
        seed,
        train_classes,
        test_classes,
    })
}

/// Stratified k-fold assignment.
///
/// Indices are grouped by class, shuffled within each class, and dealt
/// round-robin across folds, continuing from wherever the previous class
/// stopped. Per class the fold sizes differ by at most one, and a class with
/// fewer than `k` samples appears in only some folds. Folds are returned with
/// their indices sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::invalid(format!("k = {k} exceeds sample count {}", labels.len())));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = SeededRng::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        rng.shuffle(members);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-class random holdout: `round(test_fraction · n_c)` samples of each
/// class go to the test side. Returns sorted `(train, test)` index lists.
pub fn stratified_holdout(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside [0, 1]")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = SeededRng::new(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        rng.shuffle(members);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Indices of every fold except `held_out`, sorted.
pub fn training_indices(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn holdout_is_per_class() {
        let labels = [0, 0, 0, 0, 1, 1, 2];
        let (train, test) = stratified_holdout(&labels, 0.5, 3).unwrap();
        assert_eq!((train.len(), test.len()), (3, 4));
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 2);
        let mut all = [train, test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(stratified_holdout(&labels, 1.5, 0).is_err());
    }

    #[test]
    fn nine_of_many_classes_held_out() {
        let s = class_disjoint_split(89, 9, 17).unwrap();
        assert_eq!(s.test_classes.len(), 9);
        assert_eq!(s.train_classes.len(), 80);
        assert!(s.test_classes.iter().all(|c| !s.train_classes.contains(c)));
        assert_eq!(class_disjoint_split(89, 9, 17).unwrap(), s);
    }

    #[test]
    fn split_boundaries() {
        let s = class_disjoint_split(5, 4, 0).unwrap();
        assert_eq!(s.train_classes.len(), 1);
        assert!(class_disjoint_split(5, 5, 0).is_err());
        assert!(class_disjoint_split(5, 0, 0).is_err());
    }

    #[test]
    fn exact_divisibility() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            let mut ls: Vec<_> = f.iter().map(|&i| labels[i]).collect();
            ls.sort_unstable();
            assert_eq!(ls, vec![0, 1]);
        }
    }

    #[test]
    fn singleton_class_lands_once() {
        let labels = [0, 0, 0, 0, 0, 0, 1];
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        assert_eq!(folds.iter().filter(|f| f.contains(&6)).count(), 1);
    }

    #[test]
    fn leave_one_out() {
        let labels = [0, 1, 0, 1, 2];
        let folds = stratified_kfold(&labels, 5, 9).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        assert!(stratified_kfold(&labels, 6, 9).is_err());
        assert!(stratified_kfold(&labels, 1, 9).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(labels in prop::collection::vec(0usize..6, 2..80), k in 2usize..8, seed: u64) {
            prop_assume!(k <= labels.len());
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            prop_assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for class in 0..6 {
                let sizes: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
                let lo = *sizes.iter().min().unwrap();
                let hi = *sizes.iter().max().unwrap();
                prop_assert!(hi - lo <= 1);
            }
            prop_assert_eq!(stratified_kfold(&labels, k, seed).unwrap(), folds);
        }
    }
}
