//! Seeded full-graph training with validation-based model selection,
//! multi-seed aggregation, the five-variant component-ablation driver, and
//! wall-clock efficiency measurement.

use std::rc::Rc;
use std::time::Instant;

use crate::backbones::{build_model, Model, ModelConfig, NormKind};
use crate::data::{make_split, Split};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, NormalizedAdjacency};
use crate::metrics::{compute_all, EvalBatch, MetricsReport};
use crate::nn::{sigmoid, AdamState, Mode, Tape};
use crate::tensor::Tensor2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_selection_metric")]
    pub selection_metric: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_max_epochs() -> usize {
    500
}
fn default_patience() -> usize {
    50
}
fn default_selection_metric() -> String {
    "micro_ap".to_string()
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidConfig("patience must be <= max_epochs".into()));
        }
        if !MetricsReport::METRIC_NAMES.contains(&self.selection_metric.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown selection metric {}",
                self.selection_metric
            )));
        }
        Ok(())
    }
}

/// Eval-mode scoring: sigmoid(logits) restricted to `node_ids`, then all
/// seven metrics.
pub fn evaluate(
    model: &mut Model,
    adj: &Rc<NormalizedAdjacency>,
    graph: &Graph,
    node_ids: &[usize],
) -> Result<MetricsReport> {
    if node_ids.is_empty() {
        return Err(Error::InvalidConfig("evaluate: empty node set".into()));
    }
    let logits = model.infer(adj, &graph.features)?;
    let c = logits.cols;
    let mut scores = Tensor2::zeros(node_ids.len(), c);
    let mut truth = Tensor2::zeros(node_ids.len(), c);
    for (row, &i) in node_ids.iter().enumerate() {
        for j in 0..c {
            scores.set(row, j, sigmoid(logits.get(i, j)));
            truth.set(row, j, graph.labels.get(i, j));
        }
    }
    compute_all(&EvalBatch::new(scores, truth)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub train_ms_per_epoch: f64,
    pub inference_ms: f64,
}

/// One seed's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test_metrics: MetricsReport,
    pub best_val_value: f64,
    pub selected_epoch: usize,
    pub epochs_run: usize,
    pub final_train_loss_mean: f64,
    /// Absent under the deterministic flag so result files are byte-stable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Mean and sample standard deviation (n-1) per metric; std absent for a
/// single seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub per_seed: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

pub struct TrainedRun {
    pub model: Model,
    pub result: SeedResult,
}

/// Trains one model on one split: per epoch forward (train mode), summed BCE
/// over train ids, backward, Adam; keeps the best-validation snapshot and
/// stops after `patience` epochs without improvement. Test metrics come from
/// the restored snapshot.
pub fn train_one(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &Graph,
    adj: &Rc<NormalizedAdjacency>,
    split: &Split,
    seed: u64,
) -> Result<TrainedRun> {
    train_config.validate()?;
    let mut config = model_config.clone();
    config.seed = seed;
    let mut model = build_model(&config, graph.num_features(), graph.num_labels())?;
    let mut adam = AdamState::new(&model.params, train_config.learning_rate);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));

    let targets = Rc::new(graph.labels.clone());
    let train_rows = Rc::new(split.train_ids.clone());
    let denom = (split.train_ids.len() * graph.num_labels()) as f64;
    let metric = train_config.selection_metric.as_str();

    let mut best_val = MetricsReport::worst_value(metric);
    let mut best_snapshot = model.snapshot();
    let mut selected_epoch = 0;
    let mut since_best = 0usize;
    let mut epochs_run = 0usize;
    let mut final_train_loss_mean = f64::NAN;
    let mut epoch_times = Vec::new();

    for epoch in 1..=train_config.max_epochs {
        let started = Instant::now();
        let mut tape = Tape::new();
        let logits = model.forward(adj, &graph.features, Mode::Train, &mut dropout_rng, &mut tape)?;
        let loss = tape.bce_from_logits(logits, &targets, &train_rows)?;
        let loss_value = tape.scalar(loss);
        if !loss_value.is_finite() {
            return Err(Error::Divergence { epoch, seed });
        }
        model.params.zero_grads();
        tape.backward(loss, &mut model.params)?;
        adam.step(&mut model.params)?;
        epoch_times.push(started.elapsed().as_secs_f64() * 1e3);
        epochs_run = epoch;
        final_train_loss_mean = loss_value / denom;

        let val = evaluate(&mut model, adj, graph, &split.val_ids)?;
        let val_value = val.get(metric).expect("validated metric name");
        if MetricsReport::is_improvement(metric, val_value, best_val) {
            best_val = val_value;
            best_snapshot = model.snapshot();
            selected_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_config.patience {
                break;
            }
        }
    }

    model.restore(&best_snapshot);
    let test_metrics = evaluate(&mut model, adj, graph, &split.test_ids)?;

    let timing = if train_config.deterministic {
        None
    } else {
        let infer_started = Instant::now();
        model.infer(adj, &graph.features)?;
        Some(Timing {
            train_ms_per_epoch: median(&mut epoch_times),
            inference_ms: infer_started.elapsed().as_secs_f64() * 1e3,
        })
    };

    Ok(TrainedRun {
        model,
        result: SeedResult {
            seed,
            test_metrics,
            best_val_value: best_val,
            selected_epoch,
            epochs_run,
            final_train_loss_mean,
            timing,
        },
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn aggregate(per_seed: Vec<SeedResult>) -> RunResult {
    let n = per_seed.len();
    let mut means = [0.0; 7];
    for r in &per_seed {
        for (m, v) in means.iter_mut().zip(r.test_metrics.values()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let std = if n >= 2 {
        let mut acc = [0.0; 7];
        for r in &per_seed {
            for ((a, v), m) in acc.iter_mut().zip(r.test_metrics.values()).zip(means) {
                *a += (v - m) * (v - m);
            }
        }
        Some(acc.iter().map(|a| (a / (n - 1) as f64).sqrt()).collect())
    } else {
        None
    };
    let mean = MetricsReport {
        ranking_loss: means[0],
        hamming_loss: means[1],
        macro_auc: means[2],
        micro_auc: means[3],
        macro_ap: means[4],
        micro_ap: means[5],
        lrap: means[6],
        skipped_labels: Vec::new(),
        skipped_ranking_samples: 0,
        skipped_lrap_samples: 0,
    };
    RunResult {
        per_seed,
        aggregate: Aggregate { mean, std },
    }
}

/// Per seed: regenerate the 6:2:2 split with that seed, train, collect test
/// metrics; then aggregate. Returns the first seed's trained model alongside
/// for checkpointing.
pub fn run_seeds(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &Graph,
) -> Result<(RunResult, Model)> {
    train_config.validate()?;
    let adj = Rc::new(normalize_adjacency(graph));
    let mut per_seed = Vec::with_capacity(train_config.seeds.len());
    let mut first_model = None;
    for &seed in &train_config.seeds {
        let split = make_split(graph, seed)?;
        let run = train_one(model_config, train_config, graph, &adj, &split, seed)?;
        per_seed.push(run.result);
        if first_model.is_none() {
            first_model = Some(run.model);
        }
    }
    Ok((aggregate(per_seed), first_model.expect("at least one seed")))
}

pub const ABLATION_VARIANTS: [&str; 5] =
    ["Basic", "w/o Dropout", "w/o Residual", "w/o Norm", "Full"];

/// Config for one ablation row, derived from a fully strengthened base.
pub fn ablation_variant(base: &ModelConfig, variant: &str) -> Result<ModelConfig> {
    let mut config = base.clone();
    match variant {
        "Basic" => {
            config.residual = false;
            config.norm = NormKind::None;
            config.dropout_rate = 0.0;
        }
        "w/o Dropout" => config.dropout_rate = 0.0,
        "w/o Residual" => config.residual = false,
        "w/o Norm" => config.norm = NormKind::None,
        "Full" => {}
        other => return Err(Error::InvalidConfig(format!("unknown ablation variant {other}"))),
    }
    Ok(config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    /// Rows in the fixed order Basic, w/o Dropout, w/o Residual, w/o Norm, Full.
    pub rows: Vec<(String, RunResult)>,
}

/// Runs the five component-ablation variants via `run_seeds`. The base
/// config must have every strengthening component enabled.
pub fn run_ablation(
    base_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &Graph,
) -> Result<AblationTable> {
    if !base_config.residual || base_config.norm == NormKind::None || base_config.dropout_rate == 0.0
    {
        return Err(Error::InvalidConfig(
            "ablation base config must enable residual, norm, and dropout".into(),
        ));
    }
    let mut rows = Vec::with_capacity(ABLATION_VARIANTS.len());
    for variant in ABLATION_VARIANTS {
        let config = ablation_variant(base_config, variant)?;
        let (result, _) = run_seeds(&config, train_config, graph)?;
        rows.push((variant.to_string(), result));
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub backbone: String,
    pub train_ms_per_epoch: f64,
    pub inference_ms: f64,
    /// VmHWM from /proc/self/status where available.
    pub peak_rss_bytes: Option<u64>,
}

/// Median wall-clock cost of a training epoch and an inference pass.
pub fn measure_efficiency(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &Graph,
    epochs: usize,
) -> Result<EfficiencyReport> {
    let epochs = epochs.max(20);
    let adj = Rc::new(normalize_adjacency(graph));
    let split = make_split(graph, train_config.seeds[0])?;
    let mut config = model_config.clone();
    config.seed = train_config.seeds[0];
    let mut model = build_model(&config, graph.num_features(), graph.num_labels())?;
    let mut adam = AdamState::new(&model.params, train_config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let targets = Rc::new(graph.labels.clone());
    let rows = Rc::new(split.train_ids.clone());

    let mut epoch_times = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let started = Instant::now();
        let mut tape = Tape::new();
        let logits = model.forward(&adj, &graph.features, Mode::Train, &mut rng, &mut tape)?;
        let loss = tape.bce_from_logits(logits, &targets, &rows)?;
        model.params.zero_grads();
        tape.backward(loss, &mut model.params)?;
        adam.step(&mut model.params)?;
        epoch_times.push(started.elapsed().as_secs_f64() * 1e3);
    }

    let mut infer_times = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let started = Instant::now();
        model.infer(&adj, &graph.features)?;
        infer_times.push(started.elapsed().as_secs_f64() * 1e3);
    }

    Ok(EfficiencyReport {
        backbone: model_config.backbone.name().to_string(),
        train_ms_per_epoch: median(&mut epoch_times),
        inference_ms: median(&mut infer_times),
        peak_rss_bytes: peak_rss(),
    })
}

/// Best-effort peak resident set size (Linux VmHWM).
pub fn peak_rss() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: u64 = rest.trim().trim_end_matches(" kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}
