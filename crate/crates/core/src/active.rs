//! Pool-based active learning with tree committees.
//!
//! Each iteration fits a model on the labelled rows, scores every candidate
//! row, moves the chosen row into training and asks the [`LabelOracle`] for
//! its label. Candidate labels are hidden from the learner until queried.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{error_rate, f1_score, majority_vote};
use crate::committee::Committee;
use crate::dataset::{BinaryDataset, SplitIndices};
use crate::enumerator::{enumerate_rashomon, EnumConfig, RashomonSet};
use crate::error::{Error, Result};
use crate::learners::{train_forest, ForestConfig};
use crate::patterns::{group_patterns, unique_representatives, ClassificationPattern};
use crate::rng::{derive_seed, stream_rng};

/// Source of true labels. Queried for the initial training rows, the test
/// rows, and each candidate row once it is selected.
pub trait LabelOracle: Sync {
    fn label(&self, row: usize) -> usize;
}

impl LabelOracle for BinaryDataset {
    fn label(&self, row: usize) -> usize {
        BinaryDataset::label(self, row)
    }
}

/// Wraps another oracle and logs every row it is asked about.
pub struct RecordingOracle<'a, O: LabelOracle + ?Sized> {
    inner: &'a O,
    log: std::sync::Mutex<Vec<usize>>,
}

impl<'a, O: LabelOracle + ?Sized> RecordingOracle<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            log: std::sync::Mutex::new(Vec::new()),
        }
    }

    pub fn queried(&self) -> Vec<usize> {
        self.log.lock().expect("oracle log poisoned").clone()
    }
}

impl<O: LabelOracle + ?Sized> LabelOracle for RecordingOracle<'_, O> {
    fn label(&self, row: usize) -> usize {
        self.log.lock().expect("oracle log poisoned").push(row);
        self.inner.label(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Vote entropy over one tree per distinct classification pattern.
    Unreal,
    /// Vote entropy over all Rashomon trees, via patterns weighted by size.
    Dureal,
    /// Vote entropy over a random forest.
    RfQbc,
    /// Uniformly random candidate.
    Passive,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Unreal, Strategy::Dureal, Strategy::RfQbc, Strategy::Passive];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Unreal => "unreal",
            Strategy::Dureal => "dureal",
            Strategy::RfQbc => "rf_qbc",
            Strategy::Passive => "passive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unreal" => Ok(Strategy::Unreal),
            "dureal" => Ok(Strategy::Dureal),
            "rf_qbc" | "rf" | "rfqbc" => Ok(Strategy::RfQbc),
            "passive" | "random" => Ok(Strategy::Passive),
            other => Err(Error::config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Model used to score the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    /// Majority vote over every Rashomon tree.
    AllTrees,
    /// Majority vote over one tree per classification pattern.
    UniquePatterns,
    /// Majority vote of a random forest.
    Forest,
}

impl FromStr for Evaluator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all_trees" | "all" => Ok(Evaluator::AllTrees),
            "unique_patterns" | "unique" => Ok(Evaluator::UniquePatterns),
            "forest" | "rf" => Ok(Evaluator::Forest),
            other => Err(Error::config(format!("unknown evaluator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub enumeration: EnumConfig,
    pub forest: ForestConfig,
    /// Test-time model for the Rashomon strategies.
    pub rashomon_evaluator: Evaluator,
    /// Test-time model for passive sampling.
    pub passive_evaluator: Evaluator,
    /// Seeds forests and passive draws; `forest.seed` is ignored.
    pub seed: u64,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            enumeration: EnumConfig::default(),
            forest: ForestConfig::default(),
            rashomon_evaluator: Evaluator::AllTrees,
            passive_evaluator: Evaluator::AllTrees,
            seed: 0,
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        self.enumeration.validate()?;
        self.forest.validate()?;
        if self.rashomon_evaluator == Evaluator::Forest {
            return Err(Error::config("Rashomon strategies are evaluated with Rashomon trees"));
        }
        Ok(())
    }

    fn evaluator(&self, strategy: Strategy) -> Evaluator {
        match strategy {
            Strategy::Unreal | Strategy::Dureal => self.rashomon_evaluator,
            Strategy::RfQbc => Evaluator::Forest,
            Strategy::Passive => self.passive_evaluator,
        }
    }
}

/// One row of a learning curve. Record `n` describes the model fitted after
/// `n` queries; `chosen_row` is the query that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub iteration: usize,
    pub train_size: usize,
    pub chosen_row: Option<usize>,
    pub selector_score: Option<f64>,
    pub test_f1: f64,
    pub test_error: f64,
    /// Rashomon set size, when one was enumerated.
    pub n_trees: Option<usize>,
    /// Distinct classification patterns on the candidate rows.
    pub n_unique_patterns: Option<usize>,
    pub truncated: bool,
    pub wall_time: Duration,
}

/// Row bookkeeping of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ALState {
    pub train: Vec<usize>,
    /// Unlabelled pool, kept sorted ascending.
    pub candidate: Vec<usize>,
    pub test: Vec<usize>,
    pub iteration: usize,
}

/// A fitted model for the current training set.
#[derive(Debug, Clone)]
pub enum Model {
    Rashomon {
        set: RashomonSet,
        patterns: Vec<ClassificationPattern>,
    },
    Forest(Committee),
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub model: Model,
    pub test_f1: f64,
    pub test_error: f64,
}

impl Snapshot {
    pub fn rashomon_set(&self) -> Option<&RashomonSet> {
        match &self.model {
            Model::Rashomon { set, .. } => Some(set),
            Model::Forest(_) => None,
        }
    }

    pub fn patterns(&self) -> Option<&[ClassificationPattern]> {
        match &self.model {
            Model::Rashomon { patterns, .. } => Some(patterns),
            Model::Forest(_) => None,
        }
    }
}

/// A single active-learning run for one strategy.
pub struct ActiveLearner<'a, O: LabelOracle + ?Sized> {
    state: ALState,
    /// Features of every row; labels only for rows the oracle has revealed.
    known: BinaryDataset,
    oracle: &'a O,
    strategy: Strategy,
    cfg: ActiveConfig,
    snapshot: Snapshot,
    history: Vec<QueryRecord>,
}

impl<'a, O: LabelOracle + ?Sized> ActiveLearner<'a, O> {
    /// Labels of `features` are never read; all labels come from `oracle`.
    /// Fits the initial model and records iteration 0.
    pub fn new(
        features: &BinaryDataset,
        oracle: &'a O,
        split: &SplitIndices,
        strategy: Strategy,
        cfg: ActiveConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if split.n_rows() != features.n_rows() {
            return Err(Error::contract(format!(
                "split covers {} rows, dataset has {}",
                split.n_rows(),
                features.n_rows()
            )));
        }
        if split.train.is_empty() || split.test.is_empty() {
            return Err(Error::contract("initial training and test sets must be nonempty"));
        }
        let start = Instant::now();
        let mut labels = vec![0; features.n_rows()];
        for &r in split.train.iter().chain(&split.test) {
            let y = oracle.label(r);
            if y >= features.n_classes() {
                return Err(Error::contract(format!("oracle returned class {y} for row {r}")));
            }
            labels[r] = y;
        }
        let known = features.with_labels(labels)?;
        let mut candidate = split.candidate.clone();
        candidate.sort_unstable();
        let state = ALState {
            train: split.train.clone(),
            candidate,
            test: split.test.clone(),
            iteration: 0,
        };
        let snapshot = fit(&known, &state, strategy, &cfg)?;
        let mut learner = Self {
            state,
            known,
            oracle,
            strategy,
            cfg,
            snapshot,
            history: Vec::new(),
        };
        let record = learner.record(None, None, start.elapsed());
        learner.history.push(record);
        Ok(learner)
    }

    pub fn state(&self) -> &ALState {
        &self.state
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    pub fn history(&self) -> &[QueryRecord] {
        &self.history
    }

    pub fn into_history(self) -> Vec<QueryRecord> {
        self.history
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Selector score of every candidate under the current model, in
    /// candidate order. Passive sampling has no scores.
    pub fn scores(&self) -> Vec<(usize, f64)> {
        let n_classes = self.known.n_classes();
        let committee = match (&self.snapshot.model, self.strategy) {
            (Model::Rashomon { set, patterns }, Strategy::Unreal) => {
                Committee::new(unique_representatives(patterns, set)).expect("patterns are nonempty")
            }
            (Model::Rashomon { set, patterns }, Strategy::Dureal) => Committee::weighted(
                unique_representatives(patterns, set),
                patterns.iter().map(|p| p.multiplicity() as f64).collect(),
            )
            .expect("patterns are nonempty"),
            (Model::Forest(forest), Strategy::RfQbc) => forest.clone(),
            _ => return Vec::new(),
        };
        self.state
            .candidate
            .iter()
            .map(|&r| (r, committee.vote_entropy(self.known.row(r), n_classes)))
            .collect()
    }

    /// Queries one candidate, refits, and returns the new record.
    pub fn step(&mut self) -> Result<QueryRecord> {
        if self.state.candidate.is_empty() {
            return Err(Error::contract("candidate pool is exhausted"));
        }
        let start = Instant::now();
        let (row, score) = match self.strategy {
            Strategy::Passive => {
                let stream = 2 * self.state.iteration as u64 + 1;
                let i = stream_rng(self.cfg.seed, stream).gen_range(0..self.state.candidate.len());
                (self.state.candidate[i], None)
            }
            _ => {
                let (row, score) = argmax_score(&self.scores());
                (row, Some(score))
            }
        };
        let y = self.oracle.label(row);
        if y >= self.known.n_classes() {
            return Err(Error::contract(format!("oracle returned class {y} for row {row}")));
        }
        let mut labels = self.known.labels().to_vec();
        labels[row] = y;
        self.known = self.known.with_labels(labels)?;
        let pos = self
            .state
            .candidate
            .binary_search(&row)
            .expect("chosen row is a candidate");
        self.state.candidate.remove(pos);
        self.state.train.push(row);
        self.state.iteration += 1;
        self.snapshot = fit(&self.known, &self.state, self.strategy, &self.cfg)?;
        let record = self.record(Some(row), score, start.elapsed());
        self.history.push(record.clone());
        Ok(record)
    }

    fn record(&self, chosen_row: Option<usize>, selector_score: Option<f64>, wall_time: Duration) -> QueryRecord {
        let (n_trees, n_unique_patterns, truncated) = match &self.snapshot.model {
            Model::Rashomon { set, patterns } => (Some(set.len()), Some(patterns.len()), set.truncated),
            Model::Forest(_) => (None, None, false),
        };
        QueryRecord {
            iteration: self.state.iteration,
            train_size: self.state.train.len(),
            chosen_row,
            selector_score,
            test_f1: self.snapshot.test_f1,
            test_error: self.snapshot.test_error,
            n_trees,
            n_unique_patterns,
            truncated,
            wall_time,
        }
    }
}

/// Highest score, ties to the first (smallest) row.
fn argmax_score(scores: &[(usize, f64)]) -> (usize, f64) {
    let mut best = scores[0];
    for &(r, s) in &scores[1..] {
        if s > best.1 {
            best = (r, s);
        }
    }
    best
}

fn fit(known: &BinaryDataset, state: &ALState, strategy: Strategy, cfg: &ActiveConfig) -> Result<Snapshot> {
    let evaluator = cfg.evaluator(strategy);
    let needs_forest = strategy == Strategy::RfQbc || evaluator == Evaluator::Forest;
    let model = if needs_forest {
        let forest_cfg = ForestConfig {
            seed: derive_seed(cfg.seed, 2 * state.iteration as u64),
            ..cfg.forest
        };
        Model::Forest(train_forest(known, &state.train, &forest_cfg)?)
    } else {
        let set = enumerate_rashomon(known, &state.train, &cfg.enumeration)?;
        let reference: Vec<&[u8]> = state.candidate.iter().map(|&r| known.row(r)).collect();
        let patterns = group_patterns(&set, &reference)?;
        Model::Rashomon { set, patterns }
    };

    let n_classes = known.n_classes();
    let predicted: Vec<usize> = match (&model, evaluator) {
        (Model::Forest(forest), _) => state
            .test
            .iter()
            .map(|&r| forest.ensemble_predict(known.row(r), n_classes))
            .collect(),
        (Model::Rashomon { set, .. }, Evaluator::AllTrees) => state
            .test
            .iter()
            .map(|&r| majority_vote(set.trees(), known.row(r), n_classes))
            .collect(),
        (Model::Rashomon { set, patterns }, _) => {
            let reps = unique_representatives(patterns, set);
            state
                .test
                .iter()
                .map(|&r| majority_vote(&reps, known.row(r), n_classes))
                .collect()
        }
    };
    let actual: Vec<usize> = state.test.iter().map(|&r| known.label(r)).collect();
    Ok(Snapshot {
        test_f1: f1_score(&predicted, &actual, n_classes)?,
        test_error: error_rate(&predicted, &actual),
        model,
    })
}

/// Runs `budget` queries and returns `budget + 1` records.
pub fn run<O: LabelOracle + ?Sized>(
    features: &BinaryDataset,
    oracle: &O,
    split: &SplitIndices,
    strategy: Strategy,
    budget: usize,
    cfg: ActiveConfig,
) -> Result<Vec<QueryRecord>> {
    if budget > split.candidate.len() {
        return Err(Error::contract(format!(
            "budget {budget} exceeds the {} candidate rows",
            split.candidate.len()
        )));
    }
    let mut learner = ActiveLearner::new(features, oracle, split, strategy, cfg)?;
    for _ in 0..budget {
        learner.step()?;
    }
    Ok(learner.into_history())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{monk1, sparse_rule};

    fn small_cfg() -> ActiveConfig {
        ActiveConfig {
            enumeration: EnumConfig::new(0.01, 0.03).with_depth_cap(2),
            forest: ForestConfig {
                n_trees: 10,
                ..ForestConfig::default()
            },
            ..ActiveConfig::default()
        }
    }

    #[test]
    fn records_and_bookkeeping() {
        let data = sparse_rule(40, 5, 0.0, 2).unwrap();
        let split = data.split(0.25, 0.2, 1).unwrap();
        for strategy in Strategy::ALL {
            let recs = run(&data, &data, &split, strategy, 5, small_cfg()).unwrap();
            assert_eq!(recs.len(), 6);
            assert_eq!(recs[0].chosen_row, None);
            let mut chosen = Vec::new();
            for (n, r) in recs.iter().enumerate() {
                assert_eq!(r.iteration, n);
                assert_eq!(r.train_size, split.train.len() + n);
                assert!((0.0..=1.0).contains(&r.test_f1));
                if n > 0 {
                    let row = r.chosen_row.unwrap();
                    assert!(split.candidate.contains(&row));
                    assert!(!chosen.contains(&row));
                    chosen.push(row);
                    assert_eq!(r.selector_score.is_some(), strategy != Strategy::Passive);
                }
                assert_eq!(r.n_trees.is_some(), strategy != Strategy::RfQbc);
            }
        }
    }

    #[test]
    fn budget_and_exhaustion() {
        let data = sparse_rule(20, 4, 0.0, 2).unwrap();
        let split = data.split(0.25, 0.2, 1).unwrap();
        let n = split.candidate.len();
        assert!(run(&data, &data, &split, Strategy::Passive, n + 1, small_cfg()).is_err());
        let recs = run(&data, &data, &split, Strategy::Unreal, n, small_cfg()).unwrap();
        assert_eq!(recs.last().unwrap().n_unique_patterns, Some(1));
        let mut l = ActiveLearner::new(&data, &data, &split, Strategy::Unreal, small_cfg()).unwrap();
        for _ in 0..n {
            l.step().unwrap();
        }
        assert!(l.step().is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let data = monk1(0);
        let split = data.split(0.2, 0.2, 4).unwrap();
        for strategy in Strategy::ALL {
            let a = run(&data, &data, &split, strategy, 3, small_cfg()).unwrap();
            let b = run(&data, &data, &split, strategy, 3, small_cfg()).unwrap();
            let strip = |v: &[QueryRecord]| {
                v.iter()
                    .map(|r| (r.chosen_row, r.selector_score, r.test_f1, r.n_trees))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn ties_go_to_smallest_row() {
        assert_eq!(argmax_score(&[(3, 0.5), (5, 0.7), (9, 0.7)]), (5, 0.7));
        assert_eq!(argmax_score(&[(3, 0.0), (5, 0.0)]), (3, 0.0));
    }
}
