//! `mlnc`: train, tune, ablate, and benchmark full-graph multi-label node
//! classifiers from a single JSON experiment config.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::rc::Rc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mlnc_core::data::{make_split, save_dataset, Split};
use mlnc_core::graph::{normalize_adjacency, Graph};
use mlnc_core::metrics::MetricsReport;
use mlnc_core::nn::{read_checkpoint, write_checkpoint};
use mlnc_core::trainer::{evaluate, measure_efficiency, run_ablation, run_seeds, train_one};
use rayon::prelude::*;

use config::{all_backbones, parse_seed_list, ExperimentConfig};
use report::GridRow;

#[derive(Parser)]
#[command(name = "mlnc", about = "Multi-label node classification benchmark runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config).
    #[arg(long)]
    seeds: Option<String>,
    /// Omit wall-clock timing so result files are byte-stable.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration across the seed list.
    Train(RunArgs),
    /// Hyperparameter grid search with validation-based selection.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        /// Worker threads for grid points (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Allow grids above 100 points.
        #[arg(long)]
        full_grid: bool,
    },
    /// The five-variant component ablation.
    Ablation(RunArgs),
    /// Wall-clock efficiency per backbone.
    Bench(RunArgs),
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of a saved checkpoint on a test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Saved split JSON; defaults to regenerating from the first seed.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(&args),
        Command::Grid { run, workers, full_grid } => cmd_grid(&run, workers, full_grid),
        Command::Ablation(args) => cmd_ablation(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Synth { config, out } => cmd_synth(&config, &out),
        Command::Eval { config, checkpoint, split, out } => {
            cmd_eval(&config, &checkpoint, split.as_deref(), out.as_deref())
        }
    }
}

fn load_with_overrides(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.train.seeds = parse_seed_list(seeds)?;
    }
    if args.deterministic {
        config.train.deterministic = true;
    }
    let out = args.out.clone().unwrap_or_else(|| config.out_dir());
    config.validate()?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((config, out))
}

fn load_graph_reporting(config: &ExperimentConfig) -> Result<Graph> {
    let graph = config.load_graph()?;
    println!(
        "dataset: N={} |E|={} d={} C={}",
        graph.num_nodes,
        graph.num_edges(),
        graph.num_features(),
        graph.num_labels()
    );
    Ok(graph)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_run_outputs(
    out: &PathBuf,
    label: &str,
    result: &mlnc_core::trainer::RunResult,
    model: &mlnc_core::backbones::Model,
) -> Result<()> {
    write(&out.join("results.json"), &serde_json::to_string_pretty(result)?)?;
    write(&out.join("results.csv"), &report::results_csv(result))?;
    write(&out.join("results.md"), &report::results_markdown(label, result))?;
    write_checkpoint(&out.join("model.ckpt"), &model.checkpoint_entries())?;
    Ok(())
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let (config, out) = load_with_overrides(args)?;
    let graph = load_graph_reporting(&config)?;
    let (result, model) = run_seeds(&config.model, &config.train, &graph)?;
    write_run_outputs(&out, config.model.backbone.name(), &result, &model)?;
    print_summary(&result);
    println!("wrote results.json, results.csv, results.md, model.ckpt to {}", out.display());
    Ok(())
}

fn print_summary(result: &mlnc_core::trainer::RunResult) {
    let means = result.aggregate.mean.values();
    let line: Vec<String> = MetricsReport::METRIC_NAMES
        .iter()
        .zip(means)
        .map(|(n, v)| format!("{n}={:.2}", v * report::SCALE))
        .collect();
    println!("test ({} seeds): {}", result.per_seed.len(), line.join(" "));
}

fn cmd_grid(args: &RunArgs, workers: Option<usize>, full_grid: bool) -> Result<()> {
    let (config, out) = load_with_overrides(args)?;
    let grid = match &config.grid {
        Some(g) if !g.is_empty() => g.clone(),
        _ => bail!("grid search requires a non-empty `grid` section in the config"),
    };
    let graph = load_graph_reporting(&config)?;
    let points = grid.points(&config.model, &config.train);
    let metric = config.train.selection_metric.clone();
    println!(
        "grid: {} points x 1 tuning seed, winner re-run on {} seeds",
        points.len(),
        config.train.seeds.len()
    );
    if points.len() > 100 && !full_grid {
        bail!(
            "grid has {} points (> 100); estimated {} training runs. Pass --full-grid to proceed",
            points.len(),
            points.len() + config.train.seeds.len()
        );
    }

    let tuning_seed = config.train.seeds[0];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    // each point trains on the tuning seed only and is scored on validation
    let mut rows: Vec<GridRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, (model, train))| {
                let mut one = train.clone();
                one.seeds = vec![tuning_seed];
                let outcome = make_split(&graph, tuning_seed).map_err(anyhow::Error::from).and_then(
                    |split| {
                        let adj = Rc::new(normalize_adjacency(&graph));
                        Ok(train_one(model, &one, &graph, &adj, &split, tuning_seed)?)
                    },
                );
                match outcome {
                    Ok(run) => GridRow {
                        index,
                        model: model.clone(),
                        learning_rate: train.learning_rate,
                        val_value: Some(run.result.best_val_value),
                        error: None,
                    },
                    Err(e) => GridRow {
                        index,
                        model: model.clone(),
                        learning_rate: train.learning_rate,
                        val_value: None,
                        error: Some(format!("{e:#}")),
                    },
                }
            })
            .collect()
    });

    // best validation score first, failures last
    rows.sort_by(|a, b| match (a.val_value, b.val_value) {
        (Some(x), Some(y)) => {
            if MetricsReport::is_improvement(&metric, x, y) {
                std::cmp::Ordering::Less
            } else if MetricsReport::is_improvement(&metric, y, x) {
                std::cmp::Ordering::Greater
            } else {
                a.index.cmp(&b.index)
            }
        }
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    write(&out.join("leaderboard.csv"), &report::leaderboard_csv(&metric, &rows))?;

    let failures = rows.iter().filter(|r| r.val_value.is_none()).count();
    let winner = rows.iter().find(|r| r.val_value.is_some());
    if let Some(winner) = winner {
        println!(
            "winner: point {} (val {metric} {:.2}); re-running on all seeds",
            winner.index,
            winner.val_value.unwrap() * report::SCALE
        );
        let (_, train) = &points[winner.index];
        let (result, model) = run_seeds(&winner.model, train, &graph)?;
        write_run_outputs(&out, winner.model.backbone.name(), &result, &model)?;
        print_summary(&result);
    }
    println!("wrote leaderboard.csv to {}", out.display());
    if failures > 0 {
        bail!("{failures} of {} grid points failed (see leaderboard.csv)", rows.len());
    }
    if winner.is_none() {
        bail!("all grid points failed");
    }
    Ok(())
}

fn cmd_ablation(args: &RunArgs) -> Result<()> {
    let (config, out) = load_with_overrides(args)?;
    let graph = load_graph_reporting(&config)?;
    let table = run_ablation(&config.model, &config.train, &graph)?;
    write(&out.join("ablation.json"), &serde_json::to_string_pretty(&table)?)?;
    write(&out.join("ablation.csv"), &report::ablation_csv(&table))?;
    let md = report::ablation_markdown(config.model.backbone.name(), &table);
    write(&out.join("ablation.md"), &md)?;
    print!("{md}");
    println!("wrote ablation.json, ablation.csv, ablation.md to {}", out.display());
    Ok(())
}

fn cmd_bench(args: &RunArgs) -> Result<()> {
    let (config, out) = load_with_overrides(args)?;
    let graph = load_graph_reporting(&config)?;
    let reports: Vec<_> = all_backbones(&config.model)
        .iter()
        .map(|m| measure_efficiency(m, &config.train, &graph, 20))
        .collect::<mlnc_core::Result<_>>()?;
    write(&out.join("bench.json"), &serde_json::to_string_pretty(&reports)?)?;
    let md = report::bench_markdown(&reports);
    write(&out.join("bench.md"), &md)?;
    print!("{md}");
    println!("wrote bench.json, bench.md to {}", out.display());
    Ok(())
}

fn cmd_synth(config_path: &Path, out: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    if config.synthetic.is_none() {
        bail!("synth requires a `synthetic` section in the config");
    }
    let graph = config.load_graph()?;
    save_dataset(&graph, out)?;
    let split = make_split(&graph, config.train.seeds[0])?;
    split.save(&out.join("split.json"))?;
    println!(
        "dataset: N={} |E|={} d={} C={}",
        graph.num_nodes,
        graph.num_edges(),
        graph.num_features(),
        graph.num_labels()
    );
    println!("wrote dataset and split.json to {}", out.display());
    Ok(())
}

fn cmd_eval(
    config_path: &Path,
    checkpoint: &Path,
    split: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let graph = load_graph_reporting(&config)?;
    let mut model = mlnc_core::backbones::build_model(
        &config.model,
        graph.num_features(),
        graph.num_labels(),
    )?;
    let entries = read_checkpoint(checkpoint)?;
    model.load_entries(&entries)?;
    let split = match split {
        Some(path) => Split::load(path)?,
        None => make_split(&graph, config.train.seeds[0])?,
    };
    let adj = Rc::new(normalize_adjacency(&graph));
    let metrics = evaluate(&mut model, &adj, &graph, &split.test_ids)?;
    let json = serde_json::to_string_pretty(&metrics)?;
    println!("{json}");
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        write(&out.join("metrics.json"), &json)?;
    }
    Ok(())
}
