//! Exact enumeration of the Rashomon set of sparse decision trees.
//!
//! The search works on subproblems `(rows reaching a node, remaining depth)`.
//! For each subproblem it first computes the optimal subtree cost, then lists
//! every subtree whose cost is within `epsilon` of that optimum. Any subtree
//! of a tree in the Rashomon set has slack at most `epsilon` against its own
//! subproblem optimum, so the per-subproblem lists are sufficient, and both
//! the optimum and the list are memoized on the row set.
//!
//! A split is only considered when both children receive at least one
//! training row. This also rules out reusing a feature already tested on the
//! path, since such a feature is constant on the rows that reach the node.

mod brute_force;

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bitset::RowSet;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::tree::{canonicalize, Node, Objective, SparseTree, TreeKey};

pub use brute_force::brute_force_enumerate;

/// Absolute slack on the membership test, so that a tree sitting exactly on
/// `optimal + epsilon` is not lost to decimal rounding of `epsilon`.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Brute-force enumeration is only attempted below these sizes.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 8;
pub const BRUTE_FORCE_MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumConfig {
    /// Penalty per leaf.
    pub lambda: f64,
    /// Additive slack on the regularized objective.
    pub epsilon: f64,
    pub depth_cap: usize,
    /// Hard cap on the number of trees kept; hitting it sets
    /// [`RashomonSet::truncated`].
    pub max_trees: usize,
}

impl Default for EnumConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            epsilon: 0.0,
            depth_cap: 3,
            max_trees: 200_000,
        }
    }
}

impl EnumConfig {
    pub fn new(lambda: f64, epsilon: f64) -> Self {
        Self {
            lambda,
            epsilon,
            ..Self::default()
        }
    }

    pub fn with_depth_cap(mut self, depth_cap: usize) -> Self {
        self.depth_cap = depth_cap;
        self
    }

    pub fn with_max_trees(mut self, max_trees: usize) -> Self {
        self.max_trees = max_trees;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.max_trees == 0 {
            return Err(Error::config("max_trees must be at least 1"));
        }
        Ok(())
    }
}

/// Membership test shared by the search and the brute-force oracle.
#[inline]
pub fn within_threshold(value: f64, optimal: f64, epsilon: f64) -> bool {
    value <= optimal + epsilon + THRESHOLD_SLACK
}

#[derive(Debug, Clone)]
pub struct RashomonMember {
    pub tree: SparseTree,
    pub objective: Objective,
    pub key: TreeKey,
}

/// All trees within `epsilon` of the optimal regularized objective, sorted
/// by `(objective, canonical key)`.
#[derive(Debug, Clone)]
pub struct RashomonSet {
    pub optimal: Objective,
    pub epsilon: f64,
    pub lambda: f64,
    pub depth_cap: usize,
    pub members: Vec<RashomonMember>,
    /// Set when `max_trees` cut the enumeration short.
    pub truncated: bool,
}

impl RashomonSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn trees(&self) -> impl Iterator<Item = &SparseTree> + '_ {
        self.members.iter().map(|m| &m.tree)
    }

    pub fn keys(&self) -> Vec<TreeKey> {
        self.members.iter().map(|m| m.key.clone()).collect()
    }

    pub(crate) fn from_members(
        mut members: Vec<RashomonMember>,
        cfg: &EnumConfig,
        truncated: bool,
    ) -> Self {
        members.sort_by(|a, b| {
            a.objective
                .regularized
                .total_cmp(&b.objective.regularized)
                .then_with(|| a.key.cmp(&b.key))
        });
        members.dedup_by(|a, b| a.key == b.key);
        let mut truncated = truncated;
        if members.len() > cfg.max_trees {
            members.truncate(cfg.max_trees);
            truncated = true;
        }
        let optimal = members[0].objective;
        Self {
            optimal,
            epsilon: cfg.epsilon,
            lambda: cfg.lambda,
            depth_cap: cfg.depth_cap,
            members,
            truncated,
        }
    }
}

/// The tree with the smallest regularized objective; ties go to the smallest
/// canonical key.
pub fn find_optimal(
    data: &BinaryDataset,
    rows: &[usize],
    cfg: &EnumConfig,
) -> Result<(SparseTree, Objective)> {
    let exact = EnumConfig {
        epsilon: 0.0,
        ..*cfg
    };
    let set = enumerate_rashomon(data, rows, &exact)?;
    let best = set.members.into_iter().next().expect("optimum is always listed");
    Ok((best.tree, best.objective))
}

/// Every tree within `depth_cap` whose regularized objective on `rows` is at
/// most the optimum plus `epsilon`.
pub fn enumerate_rashomon(
    data: &BinaryDataset,
    rows: &[usize],
    cfg: &EnumConfig,
) -> Result<RashomonSet> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::contract("cannot enumerate trees on an empty row set"));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= data.n_rows()) {
        return Err(Error::contract(format!("row {r} out of range")));
    }
    let mut search = Search::new(data, rows, cfg);
    let root = RowSet::full(rows.len());
    let opt = search.optimum(&root, cfg.depth_cap);
    let list = search.list(&root, cfg.depth_cap);
    let n = rows.len();
    let optimal_value = search.value(opt);

    let members: Vec<RashomonMember> = list
        .iter()
        .filter(|s| within_threshold(s.value, optimal_value, cfg.epsilon))
        .map(|s| {
            let tree = SparseTree::from_parts(s.node.clone(), s.depth as usize, s.cost.leaves as usize);
            let objective =
                Objective::from_counts(s.cost.errors as usize, n, s.cost.leaves as usize, cfg.lambda);
            let key = canonicalize(&tree);
            RashomonMember {
                tree,
                objective,
                key,
            }
        })
        .collect();
    Ok(RashomonSet::from_members(members, cfg, search.truncated))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cost {
    errors: u32,
    leaves: u32,
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost {
            errors: self.errors + o.errors,
            leaves: self.leaves + o.leaves,
        }
    }
}

struct Subtree {
    cost: Cost,
    value: f64,
    depth: u8,
    node: Arc<Node>,
}

type MemoKey = (RowSet, usize);

struct Search {
    n_rows: usize,
    lambda: f64,
    epsilon: f64,
    max_trees: usize,
    /// Positions (into the enumerated rows) where each feature is 1.
    feature_sets: Vec<RowSet>,
    class_sets: Vec<RowSet>,
    optimum_memo: HashMap<MemoKey, Cost>,
    list_memo: HashMap<MemoKey, Rc<Vec<Subtree>>>,
    leaf_nodes: Vec<Arc<Node>>,
    truncated: bool,
}

impl Search {
    fn new(data: &BinaryDataset, rows: &[usize], cfg: &EnumConfig) -> Self {
        let m = rows.len();
        let mut feature_sets = vec![RowSet::empty(m); data.n_features()];
        let mut class_sets = vec![RowSet::empty(m); data.n_classes()];
        for (pos, &r) in rows.iter().enumerate() {
            for (f, &bit) in data.row(r).iter().enumerate() {
                if bit == 1 {
                    feature_sets[f].insert(pos);
                }
            }
            class_sets[data.label(r)].insert(pos);
        }
        Self {
            n_rows: m,
            lambda: cfg.lambda,
            epsilon: cfg.epsilon,
            max_trees: cfg.max_trees,
            feature_sets,
            class_sets,
            optimum_memo: HashMap::new(),
            list_memo: HashMap::new(),
            leaf_nodes: (0..data.n_classes()).map(|c| Arc::new(Node::Leaf(c))).collect(),
            truncated: false,
        }
    }

    #[inline]
    fn value(&self, c: Cost) -> f64 {
        Objective::from_counts(c.errors as usize, self.n_rows, c.leaves as usize, self.lambda)
            .regularized
    }

    /// Class counts of a row set and the size of the majority.
    fn class_counts(&self, rows: &RowSet) -> (Vec<u32>, u32) {
        let counts: Vec<u32> = self
            .class_sets
            .iter()
            .map(|c| c.intersection_count(rows))
            .collect();
        let max = counts.iter().copied().max().unwrap_or(0);
        (counts, max)
    }

    /// Splits `rows` on `feature`, or `None` when a side would be empty.
    fn children(&self, rows: &RowSet, size: u32, feature: usize) -> Option<(RowSet, RowSet)> {
        let ones = self.feature_sets[feature].intersection_count(rows);
        if ones == 0 || ones == size {
            return None;
        }
        Some((
            rows.difference(&self.feature_sets[feature]),
            rows.intersection(&self.feature_sets[feature]),
        ))
    }

    fn optimum(&mut self, rows: &RowSet, depth: usize) -> Cost {
        let key = (rows.clone(), depth);
        if let Some(&c) = self.optimum_memo.get(&key) {
            return c;
        }
        let size = rows.count();
        let (_, majority) = self.class_counts(rows);
        let mut best = Cost {
            errors: size - majority,
            leaves: 1,
        };
        // A split costs at least two error-free leaves.
        let split_floor = self.value(Cost {
            errors: 0,
            leaves: 2,
        });
        if depth > 0 && self.value(best) > split_floor {
            for f in 0..self.feature_sets.len() {
                let Some((zero, one)) = self.children(rows, size, f) else {
                    continue;
                };
                let c = self.optimum(&zero, depth - 1) + self.optimum(&one, depth - 1);
                if self.value(c) < self.value(best) {
                    best = c;
                }
            }
        }
        self.optimum_memo.insert(key, best);
        best
    }

    /// Every subtree for `(rows, depth)` within `epsilon` of its optimum,
    /// sorted by cost.
    fn list(&mut self, rows: &RowSet, depth: usize) -> Rc<Vec<Subtree>> {
        let key = (rows.clone(), depth);
        if let Some(l) = self.list_memo.get(&key) {
            return l.clone();
        }
        let opt = self.optimum(rows, depth);
        let bound = self.value(opt) + self.epsilon + THRESHOLD_SLACK;
        let size = rows.count();
        let (counts, majority) = self.class_counts(rows);
        let mut out = Vec::new();

        let leaf_cost = Cost {
            errors: size - majority,
            leaves: 1,
        };
        let leaf_value = self.value(leaf_cost);
        if leaf_value <= bound {
            for (label, &c) in counts.iter().enumerate() {
                if c == majority {
                    out.push(Subtree {
                        cost: leaf_cost,
                        value: leaf_value,
                        depth: 0,
                        node: self.leaf_nodes[label].clone(),
                    });
                }
            }
        }

        let cap = self.max_trees.saturating_mul(2);
        if depth > 0 {
            'features: for f in 0..self.feature_sets.len() {
                let Some((zero, one)) = self.children(rows, size, f) else {
                    continue;
                };
                let opt_zero = self.optimum(&zero, depth - 1);
                let opt_one = self.optimum(&one, depth - 1);
                if self.value(opt_zero + opt_one) > bound {
                    continue;
                }
                let left = self.list(&zero, depth - 1);
                let right = self.list(&one, depth - 1);
                for l in left.iter() {
                    if self.value(l.cost + opt_one) > bound {
                        break;
                    }
                    for r in right.iter() {
                        let cost = l.cost + r.cost;
                        let value = self.value(cost);
                        if value > bound {
                            break;
                        }
                        out.push(Subtree {
                            cost,
                            value,
                            depth: 1 + l.depth.max(r.depth),
                            node: Arc::new(Node::Split {
                                feature: f,
                                zero: l.node.clone(),
                                one: r.node.clone(),
                            }),
                        });
                        if out.len() >= cap {
                            self.truncated = true;
                            break 'features;
                        }
                    }
                }
            }
        }

        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        if out.len() > self.max_trees {
            out.truncate(self.max_trees);
            self.truncated = true;
        }
        let out = Rc::new(out);
        self.list_memo.insert(key, out.clone());
        out
    }
}
