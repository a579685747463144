//! Replicated active-learning runs and their on-disk results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rashomon_al::active::{run, QueryRecord, Strategy};
use rashomon_al::analysis::mean_and_se;
use rashomon_al::dataset::BinaryDataset;

use crate::config::RunConfig;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub replication: usize,
    pub seed: u64,
    pub iteration: usize,
    pub strategy: Strategy,
    pub train_size: usize,
    pub chosen_row: Option<usize>,
    pub selector_score: Option<f64>,
    pub test_f1: f64,
    pub test_error: f64,
    pub n_trees: Option<usize>,
    pub n_unique_patterns: Option<usize>,
    pub truncated_flag: bool,
    pub wall_ms: f64,
}

impl ResultRow {
    fn new(replication: usize, seed: u64, strategy: Strategy, r: &QueryRecord) -> Self {
        Self {
            replication,
            seed,
            iteration: r.iteration,
            strategy,
            train_size: r.train_size,
            chosen_row: r.chosen_row,
            selector_score: r.selector_score,
            test_f1: r.test_f1,
            test_error: r.test_error,
            n_trees: r.n_trees,
            n_unique_patterns: r.n_unique_patterns,
            truncated_flag: r.truncated,
            wall_ms: r.wall_time.as_secs_f64() * 1e3,
        }
    }
}

/// The output directory already holds results of another configuration.
#[derive(Debug)]
pub struct ManifestMismatch(pub PathBuf);

impl std::fmt::Display for ManifestMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} holds results for a different configuration; choose another output directory",
            self.0.display()
        )
    }
}

impl std::error::Error for ManifestMismatch {}

/// Identifies what produced a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub dataset_name: String,
    pub dataset_sha256: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub completed: usize,
    pub failed: usize,
    /// `None` when no replication completed.
    pub mean_final_f1: Option<f64>,
    pub se_final_f1: Option<f64>,
    /// Mean over replications of the F1 averaged along the learning curve.
    pub mean_curve_f1: Option<f64>,
    pub truncated_iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub n_replications: usize,
    pub strategies: Vec<StrategySummary>,
    pub failures: Vec<Failure>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads the configured dataset, applying the optional subsample.
pub fn load_dataset(cfg: &RunConfig) -> Result<(BinaryDataset, String)> {
    let bytes = fs::read(&cfg.dataset).with_context(|| format!("reading {}", cfg.dataset.display()))?;
    let data = BinaryDataset::read_csv(bytes.as_slice(), 2)
        .with_context(|| format!("loading {}", cfg.dataset.display()))?;
    let data = match cfg.subsample {
        Some(n) => data.subsample(n, cfg.base_seed)?,
        None => data,
    };
    Ok((data, sha256_hex(&bytes)))
}

fn write_atomically(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// Runs every (replication, strategy) pair of `cfg` on up to `jobs` threads
/// and writes `results.csv`, `summary.json` and `manifest.json` into the
/// output directory. A failing replication is logged in the summary and the
/// rest still run. An existing directory is reused only if its manifest
/// matches.
pub fn run_experiment(cfg: &RunConfig, jobs: usize) -> Result<RunSummary> {
    cfg.validate()?;
    let (data, digest) = load_dataset(cfg)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset_name: cfg.dataset_name(),
        dataset_sha256: digest,
        n_rows: data.n_rows(),
        n_features: data.n_features(),
        n_classes: data.n_classes(),
        config: cfg.clone(),
    };
    let out = &cfg.output_dir;
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let existing: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
        if existing != manifest {
            return Err(ManifestMismatch(out.clone()).into());
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let tasks: Vec<(usize, Strategy)> = (0..cfg.n_replications)
        .flat_map(|r| cfg.strategies.iter().map(move |&s| (r, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcomes: Vec<(usize, Strategy, std::result::Result<Vec<QueryRecord>, String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, strategy)| {
                let start = Instant::now();
                let outcome = run_replication(cfg, &data, r, strategy).map_err(|e| format!("{e:#}"));
                match &outcome {
                    Ok(_) => log::info!("replication {r} {strategy} finished in {:.2?}", start.elapsed()),
                    Err(e) => log::warn!("replication {r} {strategy} failed: {e}"),
                }
                (r, strategy, outcome)
            })
            .collect()
    });

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut failures = Vec::new();
    for (r, strategy, outcome) in &outcomes {
        let seed = cfg.replication_seed(*r);
        match outcome {
            Ok(records) => {
                for rec in records {
                    writer.serialize(ResultRow::new(*r, seed, *strategy, rec))?;
                }
            }
            Err(error) => failures.push(Failure {
                replication: *r,
                seed,
                strategy: *strategy,
                error: error.clone(),
            }),
        }
    }
    let body = writer.into_inner().map_err(|e| anyhow::anyhow!("flushing results: {e}"))?;
    write_atomically(&out.join(RESULTS_FILE), &body)?;

    let summary = summarize(cfg, &outcomes, failures);
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_atomically(&out.join(SUMMARY_FILE), &json)?;
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomically(&manifest_path, &json)?;
    Ok(summary)
}

fn run_replication(cfg: &RunConfig, data: &BinaryDataset, r: usize, strategy: Strategy) -> Result<Vec<QueryRecord>> {
    let seed = cfg.replication_seed(r);
    let noisy;
    let data = if cfg.noise_flip_prob > 0.0 {
        noisy = data.inject_label_noise(cfg.noise_flip_prob, seed)?;
        &noisy
    } else {
        data
    };
    let split = data.split(cfg.test_frac, cfg.init_train_frac, seed)?;
    let budget = cfg.budget.unwrap_or(split.candidate.len());
    Ok(run(data, data, &split, strategy, budget, cfg.active_config(seed))?)
}

type Outcome = (usize, Strategy, std::result::Result<Vec<QueryRecord>, String>);

fn summarize(cfg: &RunConfig, outcomes: &[Outcome], failures: Vec<Failure>) -> RunSummary {
    let strategies = cfg
        .strategies
        .iter()
        .map(|&strategy| {
            let runs: Vec<&Vec<QueryRecord>> = outcomes
                .iter()
                .filter(|(_, s, _)| *s == strategy)
                .filter_map(|(_, _, o)| o.as_ref().ok())
                .collect();
            let finals: Vec<f64> = runs.iter().filter_map(|r| r.last()).map(|r| r.test_f1).collect();
            let curves: Vec<f64> = runs
                .iter()
                .map(|r| r.iter().map(|q| q.test_f1).sum::<f64>() / r.len() as f64)
                .collect();
            let (mean_final_f1, se_final_f1) = mean_and_se(&finals);
            let finite = |v: f64| v.is_finite().then_some(v);
            StrategySummary {
                strategy,
                completed: runs.len(),
                failed: failures.iter().filter(|f| f.strategy == strategy).count(),
                mean_final_f1: finite(mean_final_f1),
                se_final_f1: finite(se_final_f1),
                mean_curve_f1: finite(mean_and_se(&curves).0),
                truncated_iterations: runs.iter().flat_map(|r| r.iter()).filter(|q| q.truncated).count(),
                wall_ms: runs
                    .iter()
                    .flat_map(|r| r.iter())
                    .map(|q| q.wall_time.as_secs_f64() * 1e3)
                    .sum(),
            }
        })
        .collect();
    RunSummary {
        dataset: cfg.dataset_name(),
        n_replications: cfg.n_replications,
        strategies,
        failures,
    }
}

/// A results directory read back from disk.
#[derive(Debug, Clone)]
pub struct ResultSet {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub rows: Vec<ResultRow>,
}

impl ResultSet {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_slice(
            &fs::read(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
        )
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
        let results_path = dir.join(RESULTS_FILE);
        let mut reader =
            csv::Reader::from_path(&results_path).with_context(|| format!("reading {}", results_path.display()))?;
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .with_context(|| format!("parsing {}", results_path.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            rows,
        })
    }

    pub fn dataset(&self) -> &str {
        &self.manifest.dataset_name
    }

    /// `test_f1` or `test_error` curves for one strategy, one per replication
    /// in replication order.
    pub fn curves(&self, strategy: Strategy, metric: fn(&ResultRow) -> f64) -> Vec<Vec<f64>> {
        let mut reps: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
        for row in self.rows.iter().filter(|r| r.strategy == strategy) {
            reps.entry(row.replication).or_default().push((row.iteration, metric(row)));
        }
        reps.into_values()
            .map(|mut v| {
                v.sort_by_key(|(it, _)| *it);
                v.into_iter().map(|(_, m)| m).collect()
            })
            .collect()
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut s: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// Result directories at `path`: the directory itself if it holds a
/// manifest, otherwise its immediate subdirectories that do.
pub fn find_result_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.join(MANIFEST_FILE).exists() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no results found under {}", path.display());
    }
    Ok(dirs)
}

/// Results CSV without the timing column, for comparing runs byte for byte.
pub fn results_without_timing(dir: &Path) -> Result<String> {
    let text = fs::read_to_string(dir.join(RESULTS_FILE))?;
    let mut out = String::new();
    for line in text.lines() {
        let cut = line.rfind(',').unwrap_or(line.len());
        out.push_str(&line[..cut]);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_json_line<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
