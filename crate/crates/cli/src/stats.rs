//! Pairwise Wilcoxon comparisons of strategies within a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use anyhow::{bail, Result};
use serde::Serialize;

use rashomon_al::active::Strategy;
use rashomon_al::analysis::{wilcoxon_test, Alternative};

use crate::experiment::ResultSet;

/// Per-replication summary that strategies are compared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// F1 after the last query.
    FinalF1,
    /// F1 averaged over every iteration of the learning curve.
    MeanF1,
}

impl FromStr for Metric {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "final_f1" => Ok(Metric::FinalF1),
            "mean_f1" => Ok(Metric::MeanF1),
            other => bail!("unknown metric {other:?}; expected final_f1 or mean_f1"),
        }
    }
}

pub fn parse_alternative(s: &str) -> Result<Alternative> {
    match s.replace('-', "_").as_str() {
        "two_sided" => Ok(Alternative::TwoSided),
        "greater" => Ok(Alternative::Greater),
        "less" => Ok(Alternative::Less),
        other => bail!("unknown alternative {other:?}; expected two_sided, greater or less"),
    }
}

/// Metric value per replication for one strategy.
pub fn per_replication(results: &ResultSet, strategy: Strategy, metric: Metric) -> BTreeMap<usize, f64> {
    let mut curves: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for row in results.rows.iter().filter(|r| r.strategy == strategy) {
        curves.entry(row.replication).or_default().push((row.iteration, row.test_f1));
    }
    curves
        .into_iter()
        .map(|(rep, mut v)| {
            v.sort_by_key(|(it, _)| *it);
            let value = match metric {
                Metric::FinalF1 => v.last().map_or(f64::NAN, |x| x.1),
                Metric::MeanF1 => v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64,
            };
            (rep, value)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseTable {
    pub dataset: String,
    pub metric: Metric,
    pub strategies: Vec<Strategy>,
    pub means: Vec<f64>,
    /// `p[i][j]` tests row strategy `i` against column strategy `j`;
    /// `None` when too few replications differ.
    pub p: Vec<Vec<Option<f64>>>,
}

/// Wilcoxon p-values for every ordered pair of strategies, paired by
/// replication.
pub fn pairwise(results: &ResultSet, metric: Metric, alternative: Alternative) -> PairwiseTable {
    let strategies = results.strategies();
    let values: Vec<BTreeMap<usize, f64>> = strategies
        .iter()
        .map(|&s| per_replication(results, s, metric))
        .collect();
    let means = values
        .iter()
        .map(|v| v.values().sum::<f64>() / v.len().max(1) as f64)
        .collect();
    let p = values
        .iter()
        .map(|a| {
            values
                .iter()
                .map(|b| {
                    let (x, y): (Vec<f64>, Vec<f64>) = a
                        .iter()
                        .filter_map(|(rep, va)| b.get(rep).map(|vb| (*va, *vb)))
                        .unzip();
                    wilcoxon_test(&x, &y, alternative).ok().map(|r| r.p_value)
                })
                .collect()
        })
        .collect();
    PairwiseTable {
        dataset: results.dataset().to_string(),
        metric,
        strategies,
        means,
        p,
    }
}

impl PairwiseTable {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset {} ({:?})", self.dataset, self.metric);
        let _ = write!(s, "{:<10}{:>10}", "", "mean");
        for st in &self.strategies {
            let _ = write!(s, "{:>10}", st.name());
        }
        s.push('\n');
        for (i, st) in self.strategies.iter().enumerate() {
            let _ = write!(s, "{:<10}{:>10.4}", st.name(), self.means[i]);
            for p in &self.p[i] {
                match p {
                    Some(p) => {
                        let _ = write!(s, "{p:>10.4}");
                    }
                    None => {
                        let _ = write!(s, "{:>10}", "NA");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (i, a) in self.strategies.iter().enumerate() {
            for (j, b) in self.strategies.iter().enumerate() {
                w.write_record([
                    self.dataset.clone(),
                    a.name().to_string(),
                    b.name().to_string(),
                    self.p[i][j].map_or(String::new(), |p| p.to_string()),
                ])?;
            }
        }
        Ok(())
    }
}
