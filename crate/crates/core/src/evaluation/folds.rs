use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Splits indices into `k` disjoint folds, dealing each class round-robin
/// after a seeded shuffle. Per-class counts across folds differ by at most one.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    // the second class continues the deal where the first stopped, balancing fold sizes
    let mut next = 0;
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Data(format!(
                "class {} has {} samples, fewer than {k} folds",
                class.name(),
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Plain shuffled k-fold, ignoring labels.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::InvalidConfig(format!("cannot split {n} samples into {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (j, i) in idx.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        let mut v = vec![Label::Positive; pos];
        v.extend(vec![Label::Negative; neg]);
        v
    }

    #[test]
    fn ten_samples_ten_folds_are_singletons() {
        let f = kfold(10, 10, 3).unwrap();
        assert!(f.iter().all(|x| x.len() == 1));
        // stratified needs k members per class; with 10 per class each fold gets one of each
        let l = labels(10, 10);
        let f = stratified_kfold(&l, 10, 3).unwrap();
        assert!(f.iter().all(|x| x.len() == 2 && l[x[0]] != l[x[1]]));
        assert!(stratified_kfold(&labels(5, 5), 10, 0).is_err());
    }

    #[test]
    fn imbalanced_counts_per_fold() {
        let l = labels(77, 256);
        let folds = stratified_kfold(&l, 10, 42).unwrap();
        for f in &folds {
            let p = f.iter().filter(|&&i| l[i] == Label::Positive).count();
            let n = f.len() - p;
            assert!(p == 7 || p == 8, "{p}");
            assert!(n == 25 || n == 26, "{n}");
        }
        assert_eq!(folds, stratified_kfold(&l, 10, 42).unwrap());
    }

    #[test]
    fn small_class_is_an_error() {
        assert!(matches!(stratified_kfold(&labels(3, 30), 4, 0), Err(Error::Data(_))));
        assert!(stratified_kfold(&labels(3, 30), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_indices(bits in proptest::collection::vec(any::<bool>(), 20..120), k in 2usize..6, seed: u64) {
            let l: Vec<Label> = bits.iter().map(|&b| if b { Label::Positive } else { Label::Negative }).collect();
            let pos = l.iter().filter(|&&x| x == Label::Positive).count();
            prop_assume!(pos >= k && l.len() - pos >= k);
            for folds in [stratified_kfold(&l, k, seed).unwrap(), kfold(l.len(), k, seed).unwrap()] {
                let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            }
            let folds = stratified_kfold(&l, k, seed).unwrap();
            for class in [Label::Positive, Label::Negative] {
                let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| l[i] == class).count()).collect();
                prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            }
        }
    }
}
