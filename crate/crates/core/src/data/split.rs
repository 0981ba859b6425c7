use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified 80/10/10 split of record indices by class, each set sorted.
/// Every class needs at least ten records.
pub fn split_8_1_1<S: AsRef<str>>(classes: &[S], seed: u64) -> Result<DatasetSplit> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        by_class.entry(c.as_ref()).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in by_class {
        if idx.len() < 10 {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                count: idx.len(),
                needed: 10,
            });
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_val = (n as f64 * 0.1).round() as usize;
        let n_test = (n as f64 * 0.1).round() as usize;
        split.validation.extend_from_slice(&idx[..n_val]);
        split.test.extend_from_slice(&idx[n_val..n_val + n_test]);
        split.train.extend_from_slice(&idx[n_val + n_test..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_of_one_class() {
        let classes = vec!["Normal"; 100];
        let s = split_8_1_1(&classes, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
    }

    #[test]
    fn deterministic() {
        let classes: Vec<String> = (0..57).map(|i| format!("c{}", i % 3)).collect();
        assert_eq!(split_8_1_1(&classes, 9).unwrap(), split_8_1_1(&classes, 9).unwrap());
        assert_ne!(split_8_1_1(&classes, 9).unwrap(), split_8_1_1(&classes, 10).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        let mut classes = vec!["a"; 20];
        classes.extend(vec!["b"; 9]);
        assert!(matches!(split_8_1_1(&classes, 0), Err(Error::ClassTooSmall { .. })));
    }

    proptest! {
        #[test]
        fn partition(sizes in proptest::collection::vec(10usize..60, 1..5), seed in any::<u64>()) {
            let classes: Vec<String> = sizes.iter().enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(format!("k{c}"), n))
                .collect();
            let s = split_8_1_1(&classes, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..classes.len()).collect::<Vec<_>>());
            for (c, &n) in sizes.iter().enumerate() {
                let name = format!("k{c}");
                let val = s.validation.iter().filter(|&&i| classes[i] == name).count();
                let test = s.test.iter().filter(|&&i| classes[i] == name).count();
                prop_assert!((val as f64 - 0.1 * n as f64).abs() <= 1.0);
                prop_assert!((test as f64 - 0.1 * n as f64).abs() <= 1.0);
            }
        }
    }
}
