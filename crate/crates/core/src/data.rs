//! Dataset I/O, train/val/test splitting, and the synthetic multi-label
//! graph generator used for desk-scale validation.
//!
//! Dataset directory format:
//!   edges.tsv    — one `src<TAB>dst` pair of 0-based node ids per line
//!   features.csv — N lines of d comma-separated reals
//!   labels.csv   — N lines of C comma-separated 0/1
//!   meta.json    — optional {"num_nodes","num_features","num_labels"} cross-check

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Disjoint 6:2:2 node partition tied to the seed that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

/// Uniform random 6:2:2 split: |train| = round(0.6N), |val| = round(0.2N),
/// remainder to test. Deterministic for a fixed seed.
pub fn make_split(graph: &Graph, seed: u64) -> Result<Split> {
    let n = graph.num_nodes;
    if n < 5 {
        return Err(Error::InvalidConfig(format!(
            "need at least 5 nodes to split, got {n}"
        )));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (0.6 * n as f64).round() as usize;
    let n_val = (0.2 * n as f64).round() as usize;
    let train_ids = ids[..n_train].to_vec();
    let val_ids = ids[n_train..n_train + n_val].to_vec();
    let test_ids = ids[n_train + n_val..].to_vec();
    Ok(Split {
        seed,
        train_ids,
        val_ids,
        test_ids,
    })
}

impl Split {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Split> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Other(format!("bad split.json: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_labels: usize,
}

fn parse_matrix(path: &Path, what: &str) -> Result<Tensor2> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::DatasetParse {
            file: path.display().to_string(),
            line: lineno + 1,
            msg: format!("bad {what} value: {e}"),
        })?;
        if let Some(c) = cols {
            if row.len() != c {
                return Err(Error::DatasetParse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected {c} columns, got {}", row.len()),
                });
            }
        } else {
            cols = Some(row.len());
        }
        rows.push(row);
    }
    Ok(Tensor2::from_rows(&rows))
}

/// Loads a dataset directory into a Graph. Input edges are treated as
/// undirected and symmetrized; duplicate lines and self-loops are dropped.
pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let features = parse_matrix(&dir.join("features.csv"), "feature")?;
    let labels = parse_matrix(&dir.join("labels.csv"), "label")?;
    let n = features.rows;
    if labels.rows != n {
        return Err(Error::InvalidGraph(format!(
            "features.csv has {n} rows but labels.csv has {}",
            labels.rows
        )));
    }

    let edges_path = dir.join("edges.tsv");
    let text =
        fs::read_to_string(&edges_path).map_err(|e| Error::io(edges_path.display().to_string(), e))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let parse = |s: Option<&str>| -> std::result::Result<usize, String> {
            s.ok_or_else(|| "missing field".to_string())?
                .trim()
                .parse::<usize>()
                .map_err(|e| e.to_string())
        };
        let src = parse(parts.next());
        let dst = parse(parts.next());
        match (src, dst) {
            (Ok(s), Ok(d)) => {
                if s >= n || d >= n {
                    return Err(Error::DatasetParse {
                        file: edges_path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("node id out of range (N={n}): {s} {d}"),
                    });
                }
                edges.push((s, d));
            }
            (Err(e), _) | (_, Err(e)) => {
                return Err(Error::DatasetParse {
                    file: edges_path.display().to_string(),
                    line: lineno + 1,
                    msg: e,
                })
            }
        }
    }

    let graph = Graph::from_edges(n, &edges, features, labels)?;

    let meta_path = dir.join("meta.json");
    if meta_path.exists() {
        let text =
            fs::read_to_string(&meta_path).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
        let meta: Meta =
            serde_json::from_str(&text).map_err(|e| Error::Other(format!("bad meta.json: {e}")))?;
        if meta.num_nodes != graph.num_nodes
            || meta.num_features != graph.num_features()
            || meta.num_labels != graph.num_labels()
        {
            return Err(Error::InvalidGraph(format!(
                "meta.json says N={} d={} C={} but files contain N={} d={} C={}",
                meta.num_nodes,
                meta.num_features,
                meta.num_labels,
                graph.num_nodes,
                graph.num_features(),
                graph.num_labels()
            )));
        }
    }
    Ok(graph)
}

fn write_matrix(path: &Path, t: &Tensor2) -> Result<()> {
    let mut out = String::new();
    for i in 0..t.rows {
        let row: Vec<String> = t.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes a graph in the dataset directory format (inverse of `load_dataset`).
pub fn save_dataset(graph: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut edges = String::new();
    for (u, v) in graph.edge_list() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    fs::write(dir.join("edges.tsv"), edges)
        .map_err(|e| Error::io(dir.join("edges.tsv").display().to_string(), e))?;
    write_matrix(&dir.join("features.csv"), &graph.features)?;
    write_matrix(&dir.join("labels.csv"), &graph.labels)?;
    let meta = Meta {
        num_nodes: graph.num_nodes,
        num_features: graph.num_features(),
        num_labels: graph.num_labels(),
    };
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )
    .map_err(|e| Error::io(dir.join("meta.json").display().to_string(), e))
}

/// Planted-structure generator: labels sampled independently per node, edges
/// with probability `intra_p` when label sets intersect, `background_q`
/// otherwise; features are the label vector embedded in the first C of d
/// dimensions plus Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub num_labels: usize,
    pub num_features: usize,
    /// Per-label prevalence pi.
    pub label_prob: f64,
    /// Edge probability when two nodes share at least one label.
    pub intra_p: f64,
    /// Edge probability otherwise; must not exceed intra_p.
    pub background_q: f64,
    /// Std-dev of additive feature noise.
    pub noise_sigma: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.label_prob, self.intra_p, self.background_q];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(
                "synthetic probabilities must be in [0,1]".into(),
            ));
        }
        if self.background_q > self.intra_p {
            return Err(Error::InvalidConfig(
                "background_q must not exceed intra_p".into(),
            ));
        }
        if self.num_features < self.num_labels {
            return Err(Error::InvalidConfig(
                "num_features must be >= num_labels".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.num_nodes == 0 || self.num_labels == 0 {
            return Err(Error::InvalidConfig("empty synthetic spec".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Graph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c, d) = (spec.num_nodes, spec.num_labels, spec.num_features);

    let mut labels = Tensor2::zeros(n, c);
    for i in 0..n {
        loop {
            let mut any = false;
            for j in 0..c {
                let on = rng.gen_bool(spec.label_prob);
                labels.set(i, j, if on { 1.0 } else { 0.0 });
                any |= on;
            }
            if any {
                break;
            }
        }
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let share = (0..c).any(|l| labels.get(i, l) == 1.0 && labels.get(j, l) == 1.0);
            let p = if share { spec.intra_p } else { spec.background_q };
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }

    let mut features = Tensor2::zeros(n, d);
    for i in 0..n {
        for l in 0..c {
            features.set(i, l, labels.get(i, l));
        }
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
        for v in features.data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    Graph::from_edges(n, &edges, features, labels)
}
