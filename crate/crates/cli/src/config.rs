//! Experiment configuration: one JSON document naming a dataset (or a
//! synthetic spec), the model and training settings, and an optional
//! hyperparameter grid. Command-line flags override file fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mlnc_core::backbones::{Backbone, ModelConfig, NormKind};
use mlnc_core::data::{generate_synthetic, load_dataset, SyntheticSpec};
use mlnc_core::graph::Graph;
use mlnc_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSource {
    #[serde(flatten)]
    pub spec: SyntheticSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Value lists for grid search. Omitted fields keep the base model value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Vec<NormKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Vec<bool>>,
}

impl GridSpec {
    pub fn num_points(&self) -> usize {
        let len = |n: Option<usize>| n.filter(|&n| n > 0).unwrap_or(1);
        len(self.learning_rate.as_ref().map(Vec::len))
            * len(self.hidden.as_ref().map(Vec::len))
            * len(self.dropout_rate.as_ref().map(Vec::len))
            * len(self.depth.as_ref().map(Vec::len))
            * len(self.norm.as_ref().map(Vec::len))
            * len(self.residual.as_ref().map(Vec::len))
    }

    pub fn is_empty(&self) -> bool {
        self.learning_rate.is_none()
            && self.hidden.is_none()
            && self.dropout_rate.is_none()
            && self.depth.is_none()
            && self.norm.is_none()
            && self.residual.is_none()
    }

    /// Cartesian product, applied on top of base model/train configs.
    pub fn points(&self, model: &ModelConfig, train: &TrainConfig) -> Vec<(ModelConfig, TrainConfig)> {
        let lrs = self.learning_rate.clone().unwrap_or_else(|| vec![train.learning_rate]);
        let hiddens = self.hidden.clone().unwrap_or_else(|| vec![model.hidden]);
        let dropouts = self.dropout_rate.clone().unwrap_or_else(|| vec![model.dropout_rate]);
        let depths = self.depth.clone().unwrap_or_else(|| vec![model.depth]);
        let norms = self.norm.clone().unwrap_or_else(|| vec![model.norm]);
        let residuals = self.residual.clone().unwrap_or_else(|| vec![model.residual]);
        let mut out = Vec::with_capacity(self.num_points());
        for &lr in &lrs {
            for &h in &hiddens {
                for &dr in &dropouts {
                    for &k in &depths {
                        for &norm in &norms {
                            for &residual in &residuals {
                                let mut m = model.clone();
                                m.hidden = h;
                                m.dropout_rate = dr;
                                m.depth = k;
                                m.norm = norm;
                                m.residual = residual;
                                let mut t = train.clone();
                                t.learning_rate = lr;
                                out.push((m, t));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => bail!("config: set exactly one of `dataset` and `synthetic`, not both"),
            (None, None) => bail!("config: set exactly one of `dataset` and `synthetic`"),
            _ => {}
        }
        self.model.validate().map_err(|e| anyhow::anyhow!("config.model: {e}"))?;
        self.train.validate().map_err(|e| anyhow::anyhow!("config.train: {e}"))?;
        if let Some(s) = &self.synthetic {
            s.spec.validate().map_err(|e| anyhow::anyhow!("config.synthetic: {e}"))?;
        }
        if let Some(grid) = &self.grid {
            for (m, t) in grid.points(&self.model, &self.train) {
                m.validate().map_err(|e| anyhow::anyhow!("config.grid: {e}"))?;
                t.validate().map_err(|e| anyhow::anyhow!("config.grid: {e}"))?;
            }
        }
        Ok(())
    }

    /// Dataset paths resolve under `MLNC_DATA_DIR` when set and the path is
    /// relative.
    pub fn load_graph(&self) -> Result<Graph> {
        if let Some(dir) = &self.dataset {
            let dir = resolve_data_path(dir);
            return load_dataset(&dir)
                .with_context(|| format!("loading dataset {}", dir.display()));
        }
        let s = self.synthetic.as_ref().expect("validated source");
        Ok(generate_synthetic(&s.spec, s.seed)?)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }
}

pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(prefix) = std::env::var("MLNC_DATA_DIR") {
            if !prefix.is_empty() {
                return Path::new(&prefix).join(path);
            }
        }
    }
    path.to_path_buf()
}

pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        bail!("empty seed list");
    }
    Ok(seeds)
}

/// The default backbone-specific configs used by `bench` when the config
/// names only one backbone.
pub fn all_backbones(base: &ModelConfig) -> Vec<ModelConfig> {
    [Backbone::Gcn, Backbone::SsgConv, Backbone::Gcnii]
        .into_iter()
        .map(|b| {
            let mut m = base.clone();
            m.backbone = b;
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "synthetic": {"num_nodes": 50, "num_labels": 3, "num_features": 8,
                          "label_prob": 0.3, "intra_p": 0.3, "background_q": 0.02,
                          "noise_sigma": 0.2, "seed": 1},
            "model": {"backbone": "gcn", "depth": 2, "hidden": 16,
                      "dropout_rate": 0.2, "norm": "batch", "residual": true, "seed": 0},
            "train": {"learning_rate": 0.01}
        }"#
    }

    #[test]
    fn config_round_trip_is_identity() {
        let a: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        let b: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), text);
    }

    #[test]
    fn rejects_both_sources() {
        let mut config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        config.dataset = Some(PathBuf::from("x"));
        assert!(config.validate().is_err());
        config.dataset = None;
        config.synthetic = None;
        assert!(config.validate().is_err());
    }

    #[test]
    fn grid_point_count_and_product() {
        let config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        let grid = GridSpec {
            learning_rate: Some(vec![0.001, 0.005, 0.01]),
            hidden: Some(vec![64, 128, 256]),
            dropout_rate: Some(vec![0.0, 0.2, 0.3, 0.5]),
            depth: Some((1..=10).collect()),
            norm: Some(vec![NormKind::Batch, NormKind::Layer]),
            residual: Some(vec![true, false]),
        };
        assert_eq!(grid.num_points(), 1440);
        let two = GridSpec {
            learning_rate: Some(vec![0.001, 0.01]),
            hidden: Some(vec![8, 16]),
            ..Default::default()
        };
        let points = two.points(&config.model, &config.train);
        assert_eq!(points.len(), 4);
        assert_eq!(points[0].1.learning_rate, 0.001);
        assert_eq!(points[3].0.hidden, 16);
        // untouched fields come from the base config
        assert!(points.iter().all(|(m, _)| m.depth == 2 && m.residual));
    }

    #[test]
    fn seed_list_parsing() {
        assert_eq!(parse_seed_list("0,1, 2").unwrap(), vec![0, 1, 2]);
        assert!(parse_seed_list("a").is_err());
        assert!(parse_seed_list("").is_err());
    }

    #[test]
    fn data_dir_prefix_applies_to_relative_paths_only() {
        std::env::set_var("MLNC_DATA_DIR", "/data");
        assert_eq!(resolve_data_path(Path::new("humloc")), PathBuf::from("/data/humloc"));
        assert_eq!(resolve_data_path(Path::new("/abs/humloc")), PathBuf::from("/abs/humloc"));
        std::env::remove_var("MLNC_DATA_DIR");
    }
}
