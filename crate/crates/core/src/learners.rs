//! Random-forest baseline: bagged greedy Gini trees.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::committee::Committee;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::tree::SparseTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features drawn per split; `None` means `ceil(sqrt(n_features))`.
    pub feature_subsample: Option<usize>,
    /// Resample rows with replacement for each tree.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("forest needs at least one tree"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("forest max_depth must be at least 1"));
        }
        if self.feature_subsample == Some(0) {
            return Err(Error::config("feature_subsample must be at least 1"));
        }
        Ok(())
    }

    pub fn features_per_split(&self, n_features: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// Trains `n_trees` greedy trees on bootstrap resamples of `rows`.
pub fn train_forest(data: &BinaryDataset, rows: &[usize], cfg: &ForestConfig) -> Result<Committee> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::contract("cannot train a forest on zero rows"));
    }
    let k = cfg.features_per_split(data.n_features());
    let trees: Vec<SparseTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(cfg.seed, t as u64);
            let sample: Vec<usize> = if cfg.bootstrap {
                (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
            } else {
                rows.to_vec()
            };
            grow(data, &sample, cfg.max_depth, k, &mut rng)
        })
        .collect();
    Committee::new(trees)
}

/// A single greedy tree: best Gini split among `features_per_split` random
/// features at each node, until purity, the depth cap, or no split helps.
pub fn greedy_tree(
    data: &BinaryDataset,
    rows: &[usize],
    depth_cap: usize,
    features_per_split: usize,
    seed: u64,
) -> Result<SparseTree> {
    if rows.is_empty() {
        return Err(Error::contract("cannot grow a tree on zero rows"));
    }
    let k = features_per_split.clamp(1, data.n_features().max(1));
    let mut rng = stream_rng(seed, 0);
    Ok(grow(data, rows, depth_cap, k, &mut rng))
}

fn class_counts(data: &BinaryDataset, rows: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; data.n_classes()];
    for &r in rows {
        counts[data.label(r)] += 1;
    }
    counts
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (y, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = y;
        }
    }
    best
}

fn grow<R: Rng>(data: &BinaryDataset, rows: &[usize], depth: usize, k: usize, rng: &mut R) -> SparseTree {
    let counts = class_counts(data, rows);
    let label = majority(&counts);
    let n = rows.len();
    let parent = gini(&counts, n);
    if depth == 0 || counts[label] == n || data.n_features() == 0 {
        return SparseTree::leaf(label);
    }

    let mut features = sample(rng, data.n_features(), k).into_vec();
    features.sort_unstable();
    let mut best: Option<(usize, f64)> = None;
    for f in features {
        let mut ones = vec![0usize; data.n_classes()];
        let mut n_ones = 0;
        for &r in rows {
            if data.row(r)[f] == 1 {
                ones[data.label(r)] += 1;
                n_ones += 1;
            }
        }
        if n_ones == 0 || n_ones == n {
            continue;
        }
        let zeros: Vec<usize> = counts.iter().zip(&ones).map(|(a, b)| a - b).collect();
        let weighted = (n_ones as f64 * gini(&ones, n_ones)
            + (n - n_ones) as f64 * gini(&zeros, n - n_ones))
            / n as f64;
        if best.is_none_or(|(_, g)| weighted < g) {
            best = Some((f, weighted));
        }
    }
    match best {
        Some((f, g)) if g < parent - 1e-12 => {
            let (one_rows, zero_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| data.row(r)[f] == 1);
            let zero = grow(data, &zero_rows, depth - 1, k, rng);
            let one = grow(data, &one_rows, depth - 1, k, rng);
            SparseTree::split(f, zero, one)
        }
        _ => SparseTree::leaf(label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::objective;

    fn xor() -> BinaryDataset {
        BinaryDataset::new(
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            vec![0, 1, 1, 0],
            vec!["x0".into(), "x1".into()],
            2,
        )
        .unwrap()
    }

    #[test]
    fn single_row_is_a_leaf() {
        let t = greedy_tree(&xor(), &[1], 5, 2, 0).unwrap();
        assert_eq!(t, SparseTree::leaf(1));
    }

    #[test]
    fn separable_feature_gives_a_stump() {
        let d = BinaryDataset::new(
            vec![vec![0, 1], vec![0, 0], vec![1, 1], vec![1, 0]],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
            2,
        )
        .unwrap();
        let t = greedy_tree(&d, &[0, 1, 2, 3], 3, 2, 0).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(objective(&t, &d, &[0, 1, 2, 3], 0.0).unwrap().misclass_count, 0);
    }

    #[test]
    fn xor_needs_an_informative_first_split() {
        // Gini gains nothing at the root of exact XOR, so the greedy learner
        // stops; with a duplicated row the first split becomes informative and
        // depth 2 reaches zero training error, as the optimal tree does.
        let d = xor();
        let t = greedy_tree(&d, &[0, 1, 2, 3], 2, 2, 0).unwrap();
        assert_eq!(t.n_leaves(), 1);
        let rows = [0, 1, 2, 3, 3];
        let t = greedy_tree(&d, &rows, 2, 2, 0).unwrap();
        assert_eq!(objective(&t, &d, &rows, 0.0).unwrap().misclass_count, 0);
    }

    #[test]
    fn pure_forest_is_constant() {
        let d = BinaryDataset::new(
            vec![vec![0, 1], vec![1, 0], vec![1, 1]],
            vec![1, 1, 1],
            vec!["a".into(), "b".into()],
            2,
        )
        .unwrap();
        let f = train_forest(&d, &[0, 1, 2], &ForestConfig::default()).unwrap();
        assert_eq!(f.len(), 100);
        assert!(f.members().iter().all(|t| *t == SparseTree::leaf(1)));
        assert_eq!(f.ensemble_predict(&[0, 0], 2), 1);
    }

    #[test]
    fn forest_is_deterministic_and_valid() {
        let d = xor();
        let rows = [0, 1, 2, 3, 0, 2];
        let cfg = ForestConfig {
            n_trees: 20,
            seed: 5,
            ..ForestConfig::default()
        };
        let a = train_forest(&d, &rows, &cfg).unwrap();
        let b = train_forest(&d, &rows, &cfg).unwrap();
        assert_eq!(a.members(), b.members());
        for t in a.members() {
            t.validate(2, 2, cfg.max_depth).unwrap();
        }
    }

    #[test]
    fn degenerate_forest_equals_greedy_tree() {
        let d = xor();
        let rows = [0, 1, 2, 3, 3];
        let cfg = ForestConfig {
            n_trees: 1,
            feature_subsample: Some(2),
            bootstrap: false,
            max_depth: 2,
            seed: 9,
        };
        let f = train_forest(&d, &rows, &cfg).unwrap();
        assert_eq!(f.members()[0], greedy_tree(&d, &rows, 2, 2, 9).unwrap());
    }

    #[test]
    fn bad_configs() {
        let d = xor();
        assert!(train_forest(&d, &[], &ForestConfig::default()).is_err());
        let cfg = ForestConfig { n_trees: 0, ..ForestConfig::default() };
        assert!(train_forest(&d, &[0], &cfg).is_err());
        let cfg = ForestConfig { max_depth: 0, ..ForestConfig::default() };
        assert!(train_forest(&d, &[0], &cfg).is_err());
    }
}
