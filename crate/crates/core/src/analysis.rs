//! Evaluation metrics, the Rashomon-threshold sweep, the Wilcoxon
//! signed-rank test and baseline-relative learning curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::committee::argmax_tally;
use crate::dataset::{BinaryDataset, SplitIndices};
use crate::enumerator::{enumerate_rashomon, within_threshold, EnumConfig, RashomonSet};
use crate::error::{Error, Result};
use crate::patterns::{group_patterns, unique_representatives};
use crate::tree::SparseTree;

/// Sample sizes up to this use the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 12;
/// Minimum number of nonzero differences the test accepts.
pub const WILCOXON_MIN_N: usize = 5;

/// F1 score. With two classes, class 1 is positive; with more, the macro
/// average of one-vs-rest scores. A class that is neither present nor
/// predicted scores 1.
pub fn f1_score(predicted: &[usize], actual: &[usize], n_classes: usize) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::contract("F1 needs at least one example"));
    }
    let one_vs_rest = |c: usize| {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p == c, a == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            1.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    if n_classes <= 2 {
        Ok(one_vs_rest(1))
    } else {
        Ok((0..n_classes).map(one_vs_rest).sum::<f64>() / n_classes as f64)
    }
}

pub fn error_rate(predicted: &[usize], actual: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(actual).filter(|(p, a)| p != a).count();
    wrong as f64 / actual.len().max(1) as f64
}

/// Unweighted majority vote of `trees` on one row, ties to the smallest class.
pub fn majority_vote<'a>(trees: impl IntoIterator<Item = &'a SparseTree>, row: &[u8], n_classes: usize) -> usize {
    let mut tally = vec![0.0; n_classes];
    for t in trees {
        tally[t.predict(row)] += 1.0;
    }
    argmax_tally(&tally)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub n_trees: usize,
    pub n_unique_patterns: usize,
    /// Test error of the majority vote over one tree per classification pattern.
    pub ensemble_test_error: f64,
    pub mean_member_accuracy: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Grid point with the lowest ensemble test error, ties to the smallest.
    pub best_epsilon: f64,
}

impl SweepResult {
    /// The threshold to carry into active learning: the sweep optimum plus
    /// a caller-chosen safety margin.
    pub fn recommended_epsilon(&self, slack: f64) -> f64 {
        self.best_epsilon + slack.max(0.0)
    }
}

/// Evaluates the Rashomon ensemble on the test rows for each threshold in
/// `grid`. Trees are enumerated on the training rows and grouped by their
/// predictions on the candidate rows.
pub fn sweep_threshold(
    data: &BinaryDataset,
    split: &SplitIndices,
    base: &EnumConfig,
    grid: &[f64],
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::contract("threshold grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::contract("threshold grid must be ascending"));
    }
    let widest = EnumConfig {
        epsilon: *grid.last().expect("nonempty"),
        ..*base
    };
    let full = enumerate_rashomon(data, &split.train, &widest)?;
    let candidate_rows: Vec<&[u8]> = split.candidate.iter().map(|&r| data.row(r)).collect();
    let actual: Vec<usize> = split.test.iter().map(|&r| data.label(r)).collect();

    let mut rows = Vec::with_capacity(grid.len());
    for &epsilon in grid {
        let cfg = EnumConfig { epsilon, ..*base };
        // Sets are nested in epsilon, so the widest set can be filtered unless
        // it was cut short.
        let set = if full.truncated {
            enumerate_rashomon(data, &split.train, &cfg)?
        } else {
            RashomonSet {
                members: full
                    .members
                    .iter()
                    .filter(|m| within_threshold(m.objective.regularized, full.optimal.regularized, epsilon))
                    .cloned()
                    .collect(),
                epsilon,
                ..full.clone()
            }
        };
        let groups = group_patterns(&set, &candidate_rows)?;
        let reps = unique_representatives(&groups, &set);
        let predicted: Vec<usize> = split
            .test
            .iter()
            .map(|&r| majority_vote(&reps, data.row(r), data.n_classes()))
            .collect();
        let mean_member_accuracy = set
            .trees()
            .map(|t| {
                let p: Vec<usize> = split.test.iter().map(|&r| t.predict(data.row(r))).collect();
                1.0 - error_rate(&p, &actual)
            })
            .sum::<f64>()
            / set.len() as f64;
        rows.push(SweepRow {
            epsilon,
            n_trees: set.len(),
            n_unique_patterns: groups.len(),
            ensemble_test_error: error_rate(&predicted, &actual),
            mean_member_accuracy,
            truncated: set.truncated,
        });
    }
    let best_epsilon = rows
        .iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.ensemble_test_error <= r.ensemble_test_error => Some(b),
            _ => Some(r),
        })
        .expect("nonempty grid")
        .epsilon;
    Ok(SweepResult { rows, best_epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    TwoSided,
    /// The first sample tends to be larger.
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(wilcoxon_test(a, b, Alternative::TwoSided)?.p_value)
}

/// Wilcoxon signed-rank test on `a - b`. Zero differences are dropped. Up to
/// [`WILCOXON_EXACT_MAX_N`] differences the null distribution is enumerated;
/// above that a normal approximation with tie and continuity corrections is
/// used. If every difference is zero the p-value is 1.
pub fn wilcoxon_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n: 0,
            p_value: 1.0,
            exact: true,
        });
    }
    if diffs.len() < WILCOXON_MIN_N {
        return Err(Error::contract(format!(
            "need at least {WILCOXON_MIN_N} nonzero differences, got {}",
            diffs.len()
        )));
    }
    let ranks = signed_ranks(&diffs);
    let statistic = ranks.iter().filter(|(_, pos)| *pos).map(|(r, _)| *r).sum();
    let exact = diffs.len() <= WILCOXON_EXACT_MAX_N;
    let p_value = if exact {
        exact_p(&ranks, alternative)
    } else {
        normal_p(&ranks, alternative)
    };
    Ok(WilcoxonResult {
        statistic,
        n: diffs.len(),
        p_value,
        exact,
    })
}

/// `(rank of |d|, d > 0)` with average ranks for ties.
fn signed_ranks(diffs: &[f64]) -> Vec<(f64, bool)> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let tied = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && tied(diffs[order[i]].abs(), diffs[order[j + 1]].abs()) {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks.into_iter().zip(diffs.iter().map(|d| *d > 0.0)).collect()
}

/// Exact p-value by enumerating all `2^n` sign assignments.
pub fn wilcoxon_exact_p(a: &[f64], b: &[f64], alternative: Alternative) -> Result<f64> {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.len() > 20 {
        return Err(Error::contract("exact enumeration is limited to 20 differences"));
    }
    if diffs.is_empty() {
        return Ok(1.0);
    }
    Ok(exact_p(&signed_ranks(&diffs), alternative))
}

/// Normal-approximation p-value regardless of sample size.
pub fn wilcoxon_normal_p(a: &[f64], b: &[f64], alternative: Alternative) -> Result<f64> {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    Ok(normal_p(&signed_ranks(&diffs), alternative))
}

fn exact_p(ranks: &[(f64, bool)], alternative: Alternative) -> f64 {
    // Average ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<u64> = ranks.iter().map(|(r, _)| (r * 2.0).round() as u64).collect();
    let observed: u64 = ranks
        .iter()
        .zip(&doubled)
        .filter(|((_, pos), _)| *pos)
        .map(|(_, d)| *d)
        .sum();
    let n = ranks.len();
    let total = 1u64 << n;
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0..total {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    let p_le = le as f64 / total as f64;
    let p_ge = ge as f64 / total as f64;
    match alternative {
        Alternative::TwoSided => (2.0 * p_le.min(p_ge)).min(1.0),
        Alternative::Greater => p_ge,
        Alternative::Less => p_le,
    }
}

fn normal_p(ranks: &[(f64, bool)], alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let statistic: f64 = ranks.iter().filter(|(_, pos)| *pos).map(|(r, _)| *r).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted: Vec<f64> = ranks.iter().map(|(r, _)| *r).collect();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let normal = Normal::standard();
    match alternative {
        Alternative::TwoSided => {
            let z = ((statistic - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * normal.sf(z)).min(1.0)
        }
        Alternative::Greater => normal.sf((statistic - mean - 0.5) / sd),
        Alternative::Less => normal.cdf((statistic - mean + 0.5) / sd),
    }
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePoint {
    pub iteration: usize,
    /// Mean strategy error minus mean baseline error.
    pub delta: f64,
    /// Standard error of the paired per-replication differences.
    pub se: f64,
}

/// Per-iteration error of every strategy relative to `baseline`.
///
/// `curves[strategy][replication][iteration]` holds an error value;
/// replications are paired by index across strategies.
pub fn relative_error_curves(
    curves: &BTreeMap<String, Vec<Vec<f64>>>,
    baseline: &str,
) -> Result<BTreeMap<String, Vec<RelativePoint>>> {
    let base = curves
        .get(baseline)
        .ok_or_else(|| Error::contract(format!("baseline strategy {baseline:?} has no records")))?;
    let mut out = BTreeMap::new();
    for (name, reps) in curves {
        if reps.len() != base.len() {
            return Err(Error::contract(format!(
                "{name} has {} replications, baseline has {}",
                reps.len(),
                base.len()
            )));
        }
        if let Some((r, _)) = reps
            .iter()
            .zip(base)
            .enumerate()
            .find(|(_, (a, b))| a.len() != b.len())
        {
            return Err(Error::contract(format!(
                "{name} replication {r} has a different iteration grid than the baseline"
            )));
        }
        let n_iter = base.first().map_or(0, Vec::len);
        let points = (0..n_iter)
            .map(|it| {
                let diffs: Vec<f64> = reps.iter().zip(base).map(|(a, b)| a[it] - b[it]).collect();
                let (delta, se) = mean_and_se(&diffs);
                RelativePoint {
                    iteration: it,
                    delta,
                    se,
                }
            })
            .collect();
        out.insert(name.clone(), points);
    }
    Ok(out)
}
