//! Synthetic binary datasets: the MONK-1 concept, XOR, noisy sparse rules
//! and small random instances.

use rand::seq::index::sample;
use rand::Rng;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Number of values each MONK attribute a1..a6 takes.
pub const MONK_LEVELS: [usize; 6] = [3, 3, 2, 3, 4, 2];
/// Size of the MONK-1 training sample.
pub const MONK1_TRAIN_ROWS: usize = 124;

/// Every point of the MONK attribute space (432 rows) with the MONK-1
/// label `a1 == a2 || a5 == 1`.
pub fn monk1_full() -> BinaryDataset {
    let mut attrs = vec![Vec::new()];
    for &levels in &MONK_LEVELS {
        attrs = attrs
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (1..=levels).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let labels = attrs.iter().map(|a| usize::from(a[0] == a[1] || a[4] == 1)).collect();
    let rows = attrs.iter().map(|a| one_hot(a)).collect();
    BinaryDataset::new(rows, labels, monk_feature_names(), 2).expect("well-formed encoding")
}

/// A 124-row sample of the MONK-1 space, drawn without replacement.
pub fn monk1(seed: u64) -> BinaryDataset {
    let full = monk1_full();
    let mut rows = sample(&mut stream_rng(seed, 0), full.n_rows(), MONK1_TRAIN_ROWS).into_vec();
    rows.sort_unstable();
    full.select(&rows).expect("rows in range")
}

/// Dummy coding that drops each attribute's last value: 11 features.
fn one_hot(attrs: &[usize]) -> Vec<u8> {
    let mut bits = Vec::new();
    for (&v, &levels) in attrs.iter().zip(&MONK_LEVELS) {
        for level in 1..levels {
            bits.push(u8::from(v == level));
        }
    }
    bits
}

fn monk_feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for (a, &levels) in MONK_LEVELS.iter().enumerate() {
        for level in 1..levels {
            names.push(format!("a{}_{}", a + 1, level));
        }
    }
    names
}

/// The four-row XOR table on two features.
pub fn xor() -> BinaryDataset {
    BinaryDataset::new(
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        vec![0, 1, 1, 0],
        vec!["x0".into(), "x1".into()],
        2,
    )
    .expect("well-formed table")
}

/// Uniform random 0/1 features with label `(x0 AND x1) OR (x2 AND x3)`,
/// each label flipped with probability `flip_prob`. Needs at least four
/// features; the rest are irrelevant.
pub fn sparse_rule(n_rows: usize, n_features: usize, flip_prob: f64, seed: u64) -> Result<BinaryDataset> {
    if n_features < 4 {
        return Err(Error::config("the sparse rule needs at least 4 features"));
    }
    if n_rows == 0 {
        return Err(Error::config("n_rows must be positive"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let x: Vec<u8> = (0..n_features).map(|_| rng.gen_range(0..2u8)).collect();
        labels.push(usize::from((x[0] & x[1]) | (x[2] & x[3]) == 1));
        rows.push(x);
    }
    let names = (0..n_features).map(|f| format!("x{f}")).collect();
    let clean = BinaryDataset::new(rows, labels, names, 2)?;
    clean.inject_label_noise(flip_prob, seed.wrapping_add(1))
}

/// Fully random features and labels, for checking the enumerator against
/// brute force.
pub fn random_instance(n_rows: usize, n_features: usize, n_classes: usize, seed: u64) -> Result<BinaryDataset> {
    let mut rng = stream_rng(seed, 1);
    let rows = (0..n_rows)
        .map(|_| (0..n_features).map(|_| rng.gen_range(0..2u8)).collect())
        .collect();
    let labels = (0..n_rows).map(|_| rng.gen_range(0..n_classes)).collect();
    let names = (0..n_features).map(|f| format!("x{f}")).collect();
    BinaryDataset::new(rows, labels, names, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monk_space() {
        let full = monk1_full();
        assert_eq!(full.n_rows(), 432);
        assert_eq!(full.n_features(), 11);
        assert_eq!(full.feature_names()[0], "a1_1");
        assert_eq!(full.feature_names()[10], "a6_1");
        // a1 == a2 covers 1/3 of the space, a5 == 1 a quarter; overlap 1/12
        let positives = full.labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(positives, 432 / 3 + 432 / 4 - 432 / 12);
        for i in 0..full.n_rows() {
            let r = full.row(i);
            assert!(r[0] + r[1] <= 1 && r[2] + r[3] <= 1 && r[7] + r[8] + r[9] <= 1);
        }
    }

    #[test]
    fn monk_sample_is_deterministic() {
        let a = monk1(3);
        assert_eq!(a.n_rows(), MONK1_TRAIN_ROWS);
        assert_eq!(a, monk1(3));
        assert_ne!(a, monk1(4));
    }

    #[test]
    fn sparse_rule_without_noise_follows_rule() {
        let d = sparse_rule(200, 6, 0.0, 1).unwrap();
        for i in 0..d.n_rows() {
            let x = d.row(i);
            assert_eq!(d.label(i), usize::from((x[0] & x[1]) | (x[2] & x[3]) == 1));
        }
        assert!(sparse_rule(10, 3, 0.0, 1).is_err());
    }
}
