use rand::seq::SliceRandom;

use super::dataset::{DatasetEntry, Sample};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

pub trait Labeled {
    fn class_index(&self) -> usize;
}

impl Labeled for Sample {
    fn class_index(&self) -> usize {
        self.class_index
    }
}

impl Labeled for DatasetEntry {
    fn class_index(&self) -> usize {
        self.class_index
    }
}

#[derive(Clone, Debug)]
pub struct SplitDataset<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub class_names: Vec<String>,
    pub seed: u64,
}

/// Stratified split: each class is shuffled with its own seeded stream and
/// its first `round(ratio · n_c)` members go to `train`. Both output lists
/// keep the input order.
pub fn split<T: Labeled>(items: Vec<T>, class_names: &[String], ratio: f64, seed: u64) -> Result<SplitDataset<T>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, item) in items.iter().enumerate() {
        let c = item.class_index();
        per_class
            .get_mut(c)
            .ok_or_else(|| Error::Data(format!("item {i} has class index {c} beyond {} classes", class_names.len())))?
            .push(i);
    }
    let mut is_train = vec![false; items.len()];
    for (c, members) in per_class.iter_mut().enumerate() {
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class '{}' has {} sample(s); at least 2 are needed to split",
                class_names[c],
                members.len()
            )));
        }
        members.shuffle(&mut rng::derive(seed, rng::SPLIT, c as u64));
        let n_train = (ratio * members.len() as f64).round() as usize;
        for &i in &members[..n_train] {
            is_train[i] = true;
        }
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (item, t) in items.into_iter().zip(is_train) {
        if t {
            train.push(item);
        } else {
            val.push(item);
        }
    }
    Ok(SplitDataset {
        train,
        val,
        class_names: class_names.to_vec(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Item(usize, usize);

    impl Labeled for Item {
        fn class_index(&self) -> usize {
            self.0
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn eighty_twenty() {
        let items: Vec<Item> = (0..100).map(|i| Item(0, i)).collect();
        let s = split(items, &names(1), 0.8, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (80, 20));
    }

    #[test]
    fn half_split_per_class() {
        let items: Vec<Item> = (0..30).map(|i| Item(i % 3, i)).collect();
        let s = split(items, &names(3), 0.5, 9).unwrap();
        for c in 0..3 {
            assert_eq!(s.train.iter().filter(|x| x.0 == c).count(), 5);
            assert_eq!(s.val.iter().filter(|x| x.0 == c).count(), 5);
        }
    }

    #[test]
    fn deterministic() {
        let items: Vec<Item> = (0..50).map(|i| Item(i % 2, i)).collect();
        let a = split(items.clone(), &names(2), 0.8, 42).unwrap();
        let b = split(items.clone(), &names(2), 0.8, 42).unwrap();
        assert_eq!(a.train, b.train);
        let c = split(items, &names(2), 0.8, 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn tiny_class_named() {
        let items = vec![Item(0, 0), Item(0, 1), Item(1, 2)];
        let err = split(items, &names(2), 0.8, 0).unwrap_err();
        assert!(matches!(&err, Error::Data(m) if m.contains("'c1'")), "{err}");
    }

    #[test]
    fn bad_ratio() {
        assert!(matches!(split(Vec::<Item>::new(), &names(1), 1.0, 0), Err(Error::Config(_))));
    }
}
