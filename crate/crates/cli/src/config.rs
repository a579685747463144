use std::path::PathBuf;

use anyhow::Result;

use rashomon_al::Error;
use serde::{Deserialize, Serialize};

use rashomon_al::active::{ActiveConfig, Evaluator, Strategy};
use rashomon_al::enumerator::EnumConfig;
use rashomon_al::learners::ForestConfig;

/// Everything that determines the content of a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub strategies: Vec<Strategy>,
    pub epsilon: f64,
    pub lambda: f64,
    pub depth_cap: usize,
    pub max_trees: usize,
    /// Queries per replication; `None` labels the whole candidate pool.
    pub budget: Option<usize>,
    pub n_replications: usize,
    pub base_seed: u64,
    pub test_frac: f64,
    pub init_train_frac: f64,
    pub noise_flip_prob: f64,
    /// Use a seeded subsample of this many rows.
    pub subsample: Option<usize>,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub rashomon_evaluator: Evaluator,
    pub passive_evaluator: Evaluator,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enumeration = EnumConfig::default();
        let forest = ForestConfig::default();
        Self {
            dataset: PathBuf::new(),
            strategies: Strategy::ALL.to_vec(),
            epsilon: 0.03,
            lambda: enumeration.lambda,
            depth_cap: enumeration.depth_cap,
            max_trees: enumeration.max_trees,
            budget: None,
            n_replications: 10,
            base_seed: 0,
            test_frac: 0.2,
            init_train_frac: 0.2,
            noise_flip_prob: 0.0,
            subsample: None,
            forest_trees: forest.n_trees,
            forest_max_depth: forest.max_depth,
            rashomon_evaluator: Evaluator::AllTrees,
            passive_evaluator: Evaluator::AllTrees,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn invalid(message: impl Into<String>) -> anyhow::Error {
    Error::Config(message.into()).into()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(invalid("at least one strategy is required"));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(invalid("strategies are listed more than once"));
        }
        if self.n_replications == 0 {
            return Err(invalid("n_replications must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.noise_flip_prob) {
            return Err(invalid(format!("noise_flip_prob must lie in [0, 1], got {}", self.noise_flip_prob)));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(invalid(format!("test_frac must lie in (0, 1), got {}", self.test_frac)));
        }
        if !(self.init_train_frac > 0.0 && self.init_train_frac < 1.0) {
            return Err(invalid(format!("init_train_frac must lie in (0, 1), got {}", self.init_train_frac)));
        }
        if self.subsample == Some(0) {
            return Err(invalid("subsample must be positive"));
        }
        self.active_config(0).validate()?;
        Ok(())
    }

    /// Seed of replication `r`.
    pub fn replication_seed(&self, r: usize) -> u64 {
        self.base_seed + r as u64
    }

    pub fn active_config(&self, seed: u64) -> ActiveConfig {
        ActiveConfig {
            enumeration: EnumConfig {
                lambda: self.lambda,
                epsilon: self.epsilon,
                depth_cap: self.depth_cap,
                max_trees: self.max_trees,
            },
            forest: ForestConfig {
                n_trees: self.forest_trees,
                max_depth: self.forest_max_depth,
                ..ForestConfig::default()
            },
            rashomon_evaluator: self.rashomon_evaluator,
            passive_evaluator: self.passive_evaluator,
            seed,
        }
    }

    /// Name used for the dataset in results: the file stem.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            RunConfig { strategies: vec![], ..RunConfig::default() },
            RunConfig { strategies: vec![Strategy::Unreal, Strategy::Unreal], ..RunConfig::default() },
            RunConfig { n_replications: 0, ..RunConfig::default() },
            RunConfig { epsilon: -0.1, ..RunConfig::default() },
            RunConfig { noise_flip_prob: 1.5, ..RunConfig::default() },
            RunConfig { test_frac: 1.0, ..RunConfig::default() },
            RunConfig { init_train_frac: 0.0, ..RunConfig::default() },
            RunConfig { forest_trees: 0, ..RunConfig::default() },
            RunConfig { rashomon_evaluator: Evaluator::Forest, ..RunConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn replication_seeds_offset_the_base() {
        let cfg = RunConfig { base_seed: 40, ..RunConfig::default() };
        assert_eq!(cfg.replication_seed(0), 40);
        assert_eq!(cfg.replication_seed(3), 43);
    }
}
