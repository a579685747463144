//! Tidy CSVs for plotting learning curves, relative errors, Rashomon set
//! sizes and threshold sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rashomon_al::active::Strategy;
use rashomon_al::analysis::{mean_and_se, relative_error_curves, SweepRow};

use crate::experiment::{ResultRow, ResultSet};

pub const LEARNING_CURVES: &str = "learning_curves.csv";
pub const RELATIVE_ERROR: &str = "relative_error.csv";
pub const TREE_COUNTS: &str = "tree_counts.csv";
pub const THRESHOLD: &str = "threshold.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Strategies that relative-error curves are computed against.
pub const BASELINES: [Strategy; 2] = [Strategy::RfQbc, Strategy::Passive];

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    dataset: &'a str,
    strategy: Strategy,
    iteration: usize,
    mean_f1: f64,
    se_f1: f64,
    mean_error: f64,
    se_error: f64,
}

#[derive(Debug, Serialize)]
struct RelativeRow<'a> {
    dataset: &'a str,
    strategy: Strategy,
    baseline: Strategy,
    iteration: usize,
    delta_error: f64,
    se_delta: f64,
}

#[derive(Debug, Serialize)]
struct CountRow<'a> {
    dataset: &'a str,
    strategy: Strategy,
    iteration: usize,
    mean_n_trees: f64,
    mean_n_unique: f64,
    log_n_trees: f64,
    log_n_unique: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdRow {
    dataset: String,
    epsilon: f64,
    ensemble_error: f64,
    n_trees: usize,
    n_unique_patterns: usize,
    mean_member_accuracy: f64,
}

#[derive(Debug, Default)]
pub struct EmitReport {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Mean and standard error across replications at each iteration.
fn per_iteration(curves: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|it| {
            let v: Vec<f64> = curves.iter().filter_map(|c| c.get(it).copied()).collect();
            mean_and_se(&v)
        })
        .collect()
}

/// Writes plot-ready CSVs for `results` (and any sweep files) into `out`.
/// Strategies absent from a dataset are reported as warnings.
pub fn emit_plotdata(results: &[ResultSet], sweeps: &[PathBuf], out: &Path) -> Result<EmitReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = EmitReport::default();
    let mut curves = csv::Writer::from_path(out.join(LEARNING_CURVES))?;
    let mut relative = csv::Writer::from_path(out.join(RELATIVE_ERROR))?;
    let mut counts = csv::Writer::from_path(out.join(TREE_COUNTS))?;

    for rs in results {
        let dataset = rs.dataset();
        let present = rs.strategies();
        let missing: Vec<&str> = Strategy::ALL
            .iter()
            .filter(|s| !present.contains(s))
            .map(|s| s.name())
            .collect();
        if !missing.is_empty() {
            report
                .warnings
                .push(format!("{dataset}: no results for {}", missing.join(", ")));
        }

        let mut errors = BTreeMap::new();
        for &strategy in &present {
            let f1 = per_iteration(&rs.curves(strategy, |r: &ResultRow| r.test_f1));
            let err_curves = rs.curves(strategy, |r: &ResultRow| r.test_error);
            let err = per_iteration(&err_curves);
            for (iteration, ((mean_f1, se_f1), (mean_error, se_error))) in f1.into_iter().zip(err).enumerate() {
                curves.serialize(CurveRow {
                    dataset,
                    strategy,
                    iteration,
                    mean_f1,
                    se_f1,
                    mean_error,
                    se_error,
                })?;
            }
            errors.insert(strategy.name().to_string(), err_curves);

            let trees = rs.curves(strategy, |r: &ResultRow| r.n_trees.map_or(f64::NAN, |n| n as f64));
            let unique = rs.curves(strategy, |r: &ResultRow| r.n_unique_patterns.map_or(f64::NAN, |n| n as f64));
            if trees.iter().flatten().any(|v| v.is_nan()) {
                continue;
            }
            for (iteration, ((t, _), (u, _))) in per_iteration(&trees).into_iter().zip(per_iteration(&unique)).enumerate() {
                counts.serialize(CountRow {
                    dataset,
                    strategy,
                    iteration,
                    mean_n_trees: t,
                    mean_n_unique: u,
                    log_n_trees: t.ln(),
                    log_n_unique: u.ln(),
                })?;
            }
        }

        for baseline in BASELINES {
            if !present.contains(&baseline) || present.len() < 2 {
                continue;
            }
            match relative_error_curves(&errors, baseline.name()) {
                Ok(rel) => {
                    for (name, points) in rel {
                        let strategy: Strategy = name.parse()?;
                        for p in points {
                            relative.serialize(RelativeRow {
                                dataset,
                                strategy,
                                baseline,
                                iteration: p.iteration,
                                delta_error: p.delta,
                                se_delta: p.se,
                            })?;
                        }
                    }
                }
                Err(e) => report
                    .warnings
                    .push(format!("{dataset}: no curves relative to {baseline}: {e}")),
            }
        }
    }
    curves.flush()?;
    relative.flush()?;
    counts.flush()?;
    report.written.extend([LEARNING_CURVES, RELATIVE_ERROR, TREE_COUNTS].map(|f| out.join(f)));

    if !sweeps.is_empty() {
        let mut threshold = csv::Writer::from_path(out.join(THRESHOLD))?;
        for path in sweeps {
            let dataset = path
                .parent()
                .and_then(|p| p.file_name())
                .map_or_else(|| "sweep".to_string(), |n| n.to_string_lossy().into_owned());
            let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
            for row in reader.deserialize() {
                let row: SweepRow = row.with_context(|| format!("parsing {}", path.display()))?;
                threshold.serialize(ThresholdRow {
                    dataset: dataset.clone(),
                    epsilon: row.epsilon,
                    ensemble_error: row.ensemble_test_error,
                    n_trees: row.n_trees,
                    n_unique_patterns: row.n_unique_patterns,
                    mean_member_accuracy: row.mean_member_accuracy,
                })?;
            }
        }
        threshold.flush()?;
        report.written.push(out.join(THRESHOLD));
    }
    Ok(report)
}

/// Sweep files found next to the given result paths.
pub fn find_sweeps(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut found = Vec::new();
    for p in paths {
        let direct = p.join(SWEEP_FILE);
        if direct.exists() {
            found.push(direct);
            continue;
        }
        if let Ok(entries) = fs::read_dir(p) {
            let mut sub: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path().join(SWEEP_FILE)))
                .filter(|f| f.exists())
                .collect();
            sub.sort();
            found.extend(sub);
        }
    }
    found
}
