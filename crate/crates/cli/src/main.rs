use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rashomon_al::active::{Evaluator, Strategy};
use rashomon_al::analysis::sweep_threshold;
use rashomon_al::dataset::BinaryDataset;
use rashomon_al::enumerator::EnumConfig;
use rashomon_al::patterns::group_patterns;
use rashomon_al::synthetic;
use rashomon_al_cli::config::RunConfig;
use rashomon_al_cli::experiment::{find_result_dirs, run_experiment, write_json_line, ManifestMismatch, ResultSet};
use rashomon_al_cli::plotdata::{emit_plotdata, find_sweeps, SWEEP_FILE};
use rashomon_al_cli::stats::{pairwise, parse_alternative, Metric};

#[derive(Parser)]
#[command(name = "rashomon-al", version, about = "Rashomon-set enumeration and committee-based active learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated active-learning runs on one dataset.
    Run(RunArgs),
    /// List the Rashomon set of a dataset (or of its training split).
    Enumerate(EnumerateArgs),
    /// Ensemble test error across a grid of Rashomon thresholds.
    SweepThreshold(SweepArgs),
    /// Pairwise Wilcoxon p-values between strategies.
    Stats(StatsArgs),
    /// Aggregate results into plot-ready CSVs.
    EmitPlotdata(PlotArgs),
    /// Write a built-in synthetic dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct EnumArgs {
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    depth_cap: usize,
    #[arg(long, default_value_t = 200_000)]
    max_trees: usize,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    init_train_frac: f64,
}

#[derive(Args)]
struct RunArgs {
    /// CSV with 0/1 feature columns and an integer label in the last column.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated: unreal, dureal, rf_qbc, passive.
    #[arg(long, value_delimiter = ',', default_value = "unreal,dureal,rf_qbc,passive")]
    strategy: Vec<String>,
    #[arg(long, default_value_t = 0.03)]
    epsilon: f64,
    #[command(flatten)]
    enumeration: EnumArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Queries per replication; defaults to the whole candidate pool.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 100)]
    forest_trees: usize,
    #[arg(long, default_value_t = 8)]
    forest_max_depth: usize,
    #[arg(long, value_enum, default_value_t = EvalArg::AllTrees)]
    rashomon_eval: EvalArg,
    #[arg(long, value_enum, default_value_t = EvalArg::AllTrees)]
    passive_eval: EvalArg,
    #[arg(long, env = "RASHOMON_AL_OUT", default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    AllTrees,
    UniquePatterns,
    Forest,
}

impl From<EvalArg> for Evaluator {
    fn from(e: EvalArg) -> Self {
        match e {
            EvalArg::AllTrees => Evaluator::AllTrees,
            EvalArg::UniquePatterns => Evaluator::UniquePatterns,
            EvalArg::Forest => Evaluator::Forest,
        }
    }
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.03)]
    epsilon: f64,
    #[command(flatten)]
    enumeration: EnumArgs,
    /// Enumerate on the initial training split of this seed instead of all rows.
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    split: SplitArgs,
    /// Trees to print.
    #[arg(long, default_value_t = 20)]
    show: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    enumeration: EnumArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated thresholds; overrides the min/max/step grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    eps_min: f64,
    #[arg(long, default_value_t = 0.1)]
    eps_max: f64,
    #[arg(long, default_value_t = 0.005)]
    eps_step: f64,
    /// Margin added to the best threshold in the recommendation.
    #[arg(long, default_value_t = 0.0)]
    slack: f64,
    /// Directory for sweep.csv.
    #[arg(long, env = "RASHOMON_AL_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// A results directory, or a directory of them.
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "mean_f1")]
    metric: String,
    #[arg(long, default_value = "two_sided")]
    alternative: String,
    /// Also write the matrices as long-format CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    /// Extra sweep.csv files; ones next to the results are found automatically.
    #[arg(long, num_args = 1..)]
    sweep: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: DatasetKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 6)]
    features: usize,
    #[arg(long, default_value_t = 0.15)]
    noise: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    /// 124-row sample of the MONK-1 problem.
    Monk1,
    /// All 432 points of the MONK-1 problem.
    Monk1Full,
    /// (x0 AND x1) OR (x2 AND x3) with label noise.
    SparseRule,
    Xor,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e.downcast_ref::<rashomon_al::Error>() {
                _ if e.is::<ManifestMismatch>() => "manifest_mismatch",
                Some(rashomon_al::Error::Parse { .. }) => "parse",
                Some(rashomon_al::Error::Validation(_)) => "validation",
                Some(rashomon_al::Error::Config(_)) => "config",
                Some(rashomon_al::Error::Contract(_)) => "contract",
                Some(rashomon_al::Error::Resource(_)) => "resource",
                Some(_) => "io",
                None => "error",
            };
            let _ = write_json_line(
                std::io::stderr(),
                &ErrorLine {
                    error: kind,
                    message: format!("{e:#}"),
                },
            );
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::SweepThreshold(a) => cmd_sweep(a),
        Command::Stats(a) => cmd_stats(a),
        Command::EmitPlotdata(a) => cmd_plot(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn enum_config(a: &EnumArgs, epsilon: f64) -> EnumConfig {
    EnumConfig::new(a.lambda, epsilon)
        .with_depth_cap(a.depth_cap)
        .with_max_trees(a.max_trees)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let strategies = a
        .strategy
        .iter()
        .map(|s| s.parse::<Strategy>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let cfg = RunConfig {
        dataset: a.data,
        strategies,
        epsilon: a.epsilon,
        lambda: a.enumeration.lambda,
        depth_cap: a.enumeration.depth_cap,
        max_trees: a.enumeration.max_trees,
        budget: a.budget,
        n_replications: a.replications,
        base_seed: a.base_seed,
        test_frac: a.split.test_frac,
        init_train_frac: a.split.init_train_frac,
        noise_flip_prob: a.noise,
        subsample: a.subsample,
        forest_trees: a.forest_trees,
        forest_max_depth: a.forest_max_depth,
        rashomon_evaluator: a.rashomon_eval.into(),
        passive_evaluator: a.passive_eval.into(),
        output_dir: a.out,
    };
    let summary = run_experiment(&cfg, a.jobs)?;
    let mut out = std::io::stdout().lock();
    for s in &summary.strategies {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            out,
            "{:<8} runs {:>3}  failed {:>3}  final F1 {} ± {}  curve F1 {}",
            s.strategy.name(),
            s.completed,
            s.failed,
            fmt(s.mean_final_f1),
            fmt(s.se_final_f1),
            fmt(s.mean_curve_f1)
        )?;
    }
    for f in &summary.failures {
        writeln!(out, "failed: replication {} seed {} {}: {}", f.replication, f.seed, f.strategy, f.error)?;
    }
    writeln!(out, "results written to {}", cfg.output_dir.display())?;
    Ok(())
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<()> {
    let data = BinaryDataset::load_csv(&a.data)?;
    let (rows, reference): (Vec<usize>, Vec<usize>) = match a.split_seed {
        Some(seed) => {
            let split = data.split(a.split.test_frac, a.split.init_train_frac, seed)?;
            (split.train, split.candidate)
        }
        None => ((0..data.n_rows()).collect(), (0..data.n_rows()).collect()),
    };
    let cfg = enum_config(&a.enumeration, a.epsilon);
    let set = rashomon_al::enumerator::enumerate_rashomon(&data, &rows, &cfg)?;
    let reference_rows: Vec<&[u8]> = reference.iter().map(|&r| data.row(r)).collect();
    let patterns = group_patterns(&set, &reference_rows)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "rows {}  optimal objective {:.6}", rows.len(), set.optimal.regularized)?;
    writeln!(
        out,
        "trees {}  unique patterns {}  truncated {}",
        set.len(),
        patterns.len(),
        set.truncated
    )?;
    for m in set.members.iter().take(a.show) {
        writeln!(out, "{:.6}  {}", m.objective.regularized, m.tree)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let data = BinaryDataset::load_csv(&a.data)?;
    let split = data.split(a.split.test_frac, a.split.init_train_frac, a.seed)?;
    let grid = match a.grid {
        Some(g) => g,
        None => {
            if a.eps_step <= 0.0 || a.eps_max < a.eps_min {
                bail!("threshold grid needs eps_step > 0 and eps_max >= eps_min");
            }
            let n = ((a.eps_max - a.eps_min) / a.eps_step + 1e-9).floor() as usize;
            (0..=n).map(|i| a.eps_min + i as f64 * a.eps_step).collect()
        }
    };
    let result = sweep_threshold(&data, &split, &enum_config(&a.enumeration, 0.0), &grid)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>8} {:>8} {:>8} {:>10} {:>10}", "epsilon", "trees", "unique", "ens_error", "mean_acc")?;
    for r in &result.rows {
        writeln!(
            out,
            "{:>8.4} {:>8} {:>8} {:>10.4} {:>10.4}{}",
            r.epsilon,
            r.n_trees,
            r.n_unique_patterns,
            r.ensemble_test_error,
            r.mean_member_accuracy,
            if r.truncated { "  (truncated)" } else { "" }
        )?;
    }
    writeln!(
        out,
        "best epsilon {:.4}  recommended {:.4}",
        result.best_epsilon,
        result.recommended_epsilon(a.slack)
    )?;
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut w = csv::Writer::from_path(dir.join(SWEEP_FILE))?;
        for r in &result.rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn collect_results(paths: &[PathBuf]) -> Result<Vec<ResultSet>> {
    let mut sets = Vec::new();
    for p in paths {
        for dir in find_result_dirs(p)? {
            sets.push(ResultSet::load(&dir)?);
        }
    }
    Ok(sets)
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let alternative = parse_alternative(&a.alternative)?;
    let tables: Vec<_> = collect_results(&a.results)?
        .iter()
        .map(|rs| pairwise(rs, metric, alternative))
        .collect();
    let mut out = std::io::stdout().lock();
    for t in &tables {
        writeln!(out, "{}", t.render())?;
    }
    if let Some(path) = a.csv {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["dataset", "strategy", "versus", "p_value"])?;
        for t in &tables {
            t.write_csv(&mut w)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let sets = collect_results(&a.results)?;
    let mut sweeps = a.sweep.clone();
    sweeps.extend(find_sweeps(&a.results));
    let report = emit_plotdata(&sets, &sweeps, &a.out)?;
    for w in &report.warnings {
        log::warn!("{w}");
        eprintln!("warning: {w}");
    }
    for f in &report.written {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let data = match a.kind {
        DatasetKind::Monk1 => synthetic::monk1(a.seed),
        DatasetKind::Monk1Full => synthetic::monk1_full(),
        DatasetKind::SparseRule => synthetic::sparse_rule(a.rows, a.features, a.noise, a.seed)?,
        DatasetKind::Xor => synthetic::xor(),
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    data.write_csv(&a.out)?;
    println!("{} rows, {} features -> {}", data.n_rows(), data.n_features(), a.out.display());
    Ok(())
}
