//! The three strengthened backbones: GCN, SSGConv, and GCNII, assembled from
//! tape primitives over the normalized adjacency.
//!
//! Shared layout: features are first projected into the hidden space
//! (H0 = X * W_in), then K propagation layers run. For GCN the last
//! propagation layer maps hidden -> C and its output is the logit matrix;
//! SSGConv and GCNII keep propagation dimension-preserving and attach a
//! separate linear head. Strengthening follows the composition
//! Dropout(relu(Norm(f + R))) on hidden layers; the logit-producing layer
//! gets no norm, activation, or dropout.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::nn::{Mode, NodeId, Param, ParamId, ParamSet, RunningStats, Tape};
use crate::tensor::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Gcn,
    SsgConv,
    Gcnii,
}

impl Backbone {
    pub fn name(&self) -> &'static str {
        match self {
            Backbone::Gcn => "gcn",
            Backbone::SsgConv => "ssgconv",
            Backbone::Gcnii => "gcnii",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    None,
    Batch,
    Layer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    /// Number of propagation layers K, in [1,10].
    pub depth: usize,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub norm: NormKind,
    pub residual: bool,
    /// SSGConv initial-residual strength.
    #[serde(default = "default_ssg_alpha")]
    pub ssg_alpha: f64,
    /// GCNII initial-residual strength (constant across layers).
    #[serde(default = "default_gcnii_alpha")]
    pub gcnii_alpha: f64,
    /// GCNII identity-mapping decay: beta_l = ln(lambda/l + 1).
    #[serde(default = "default_gcnii_lambda")]
    pub gcnii_lambda: f64,
    pub seed: u64,
}

fn default_ssg_alpha() -> f64 {
    0.05
}
fn default_gcnii_alpha() -> f64 {
    0.1
}
fn default_gcnii_lambda() -> f64 {
    0.5
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.depth) {
            return Err(Error::InvalidConfig(format!("depth {} not in [1,10]", self.depth)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} not in [0,1)",
                self.dropout_rate
            )));
        }
        for (name, v) in [("ssg_alpha", self.ssg_alpha), ("gcnii_alpha", self.gcnii_alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} {v} not in [0,1]")));
            }
        }
        if self.gcnii_lambda < 0.0 {
            return Err(Error::InvalidConfig("gcnii_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Identity mapping decay weight for GCNII layer `l` (1-based).
pub fn gcnii_beta(lambda: f64, layer: usize) -> f64 {
    (lambda / layer as f64).ln_1p()
}

#[derive(Debug, Clone)]
struct NormSite {
    scale: ParamId,
    shift: ParamId,
    /// Index into `Model::norm_states` for batch norm; None for layer norm.
    state: Option<usize>,
}

#[derive(Debug, Clone)]
struct LayerParams {
    weight: Option<ParamId>,
    bias: Option<ParamId>,
    norm: Option<NormSite>,
    /// Projection for the output-layer skip when hidden != C.
    res_proj: Option<ParamId>,
}

#[derive(Debug, Clone)]
struct Arch {
    w_in: ParamId,
    layers: Vec<LayerParams>,
    head: Option<(ParamId, ParamId)>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub norm_states: Vec<RunningStats>,
    norm_state_ids: Vec<String>,
    arch: Arch,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Frozen copy of everything a trained model needs for later evaluation.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    pub params: ParamSet,
    pub norm_states: Vec<RunningStats>,
}

/// Builds a model with Glorot-uniform weights, zero biases, and unit/zero
/// norm scale/shift, all drawn from a generator seeded by `config.seed`.
pub fn build_model(config: &ModelConfig, input_dim: usize, output_dim: usize) -> Result<Model> {
    config.validate()?;
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidConfig("input and output dims must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::default();
    let mut norm_states = Vec::new();
    let mut norm_state_ids = Vec::new();
    let h = config.hidden;
    let k = config.depth;

    let w_in = params.add(Param::new("w_in", Tensor2::glorot(input_dim, h, &mut rng)));

    let add_norm =
        |params: &mut ParamSet,
         norm_states: &mut Vec<RunningStats>,
         norm_state_ids: &mut Vec<String>,
         prefix: &str,
         width: usize|
         -> Option<NormSite> {
            match config.norm {
                NormKind::None => None,
                NormKind::Batch => {
                    let scale =
                        params.add(Param::new(format!("{prefix}.norm.scale"), Tensor2::ones(1, width)));
                    let shift =
                        params.add(Param::new(format!("{prefix}.norm.shift"), Tensor2::zeros(1, width)));
                    norm_states.push(RunningStats::new(width));
                    norm_state_ids.push(format!("{prefix}.norm"));
                    Some(NormSite {
                        scale,
                        shift,
                        state: Some(norm_states.len() - 1),
                    })
                }
                NormKind::Layer => {
                    let scale =
                        params.add(Param::new(format!("{prefix}.norm.scale"), Tensor2::ones(1, width)));
                    let shift =
                        params.add(Param::new(format!("{prefix}.norm.shift"), Tensor2::zeros(1, width)));
                    Some(NormSite {
                        scale,
                        shift,
                        state: None,
                    })
                }
            }
        };

    let mut layers = Vec::with_capacity(k);
    let mut head = None;
    match config.backbone {
        Backbone::Gcn => {
            for l in 1..=k {
                let is_output = l == k;
                let out_dim = if is_output { output_dim } else { h };
                let prefix = format!("layer{l}");
                let weight = params.add(Param::new(
                    format!("{prefix}.weight"),
                    Tensor2::glorot(h, out_dim, &mut rng),
                ));
                let bias = params.add(Param::new(
                    format!("{prefix}.bias"),
                    Tensor2::zeros(1, out_dim),
                ));
                let norm = if is_output {
                    None
                } else {
                    add_norm(&mut params, &mut norm_states, &mut norm_state_ids, &prefix, h)
                };
                let res_proj = if is_output && config.residual && h != out_dim {
                    Some(params.add(Param::new(
                        format!("{prefix}.res_proj"),
                        Tensor2::glorot(h, out_dim, &mut rng),
                    )))
                } else {
                    None
                };
                layers.push(LayerParams {
                    weight: Some(weight),
                    bias: Some(bias),
                    norm,
                    res_proj,
                });
            }
        }
        Backbone::SsgConv => {
            for l in 1..=k {
                let prefix = format!("hop{l}");
                let norm = add_norm(&mut params, &mut norm_states, &mut norm_state_ids, &prefix, h);
                layers.push(LayerParams {
                    weight: None,
                    bias: None,
                    norm,
                    res_proj: None,
                });
            }
            let w = params.add(Param::new("head.weight", Tensor2::glorot(h, output_dim, &mut rng)));
            let b = params.add(Param::new("head.bias", Tensor2::zeros(1, output_dim)));
            head = Some((w, b));
        }
        Backbone::Gcnii => {
            for l in 1..=k {
                let prefix = format!("layer{l}");
                let weight = params.add(Param::new(
                    format!("{prefix}.weight"),
                    Tensor2::glorot(h, h, &mut rng),
                ));
                let norm = add_norm(&mut params, &mut norm_states, &mut norm_state_ids, &prefix, h);
                layers.push(LayerParams {
                    weight: Some(weight),
                    bias: None,
                    norm,
                    res_proj: None,
                });
            }
            let w = params.add(Param::new("head.weight", Tensor2::glorot(h, output_dim, &mut rng)));
            let b = params.add(Param::new("head.bias", Tensor2::zeros(1, output_dim)));
            head = Some((w, b));
        }
    }

    Ok(Model {
        config: config.clone(),
        params,
        norm_states,
        norm_state_ids,
        arch: Arch { w_in, layers, head },
        input_dim,
        output_dim,
    })
}

impl Model {
    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            params: self.params.clone(),
            norm_states: self.norm_states.clone(),
        }
    }

    pub fn restore(&mut self, snap: &ModelSnapshot) {
        self.params = snap.params.clone();
        self.norm_states = snap.norm_states.clone();
    }

    /// Checkpoint entries: every parameter plus batch-norm running stats.
    pub fn checkpoint_entries(&self) -> Vec<(String, Tensor2)> {
        let mut out: Vec<(String, Tensor2)> = self
            .params
            .params
            .iter()
            .map(|p| (p.id.clone(), p.value.clone()))
            .collect();
        for (name, state) in self.norm_state_ids.iter().zip(&self.norm_states) {
            out.push((
                format!("{name}.running_mean"),
                Tensor2::from_vec(1, state.mean.len(), state.mean.clone()),
            ));
            out.push((
                format!("{name}.running_var"),
                Tensor2::from_vec(1, state.var.len(), state.var.clone()),
            ));
        }
        out
    }

    /// Overwrites parameters and running stats from checkpoint entries.
    pub fn load_entries(&mut self, entries: &[(String, Tensor2)]) -> Result<()> {
        for p in self.params.params.iter_mut() {
            let found = entries
                .iter()
                .find(|(id, _)| *id == p.id)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {}", p.id)))?;
            if !found.1.same_shape(&p.value) {
                return Err(Error::Checkpoint(format!("shape mismatch for {}", p.id)));
            }
            p.value = found.1.clone();
        }
        for (name, state) in self.norm_state_ids.iter().zip(self.norm_states.iter_mut()) {
            for (suffix, slot) in [("running_mean", &mut state.mean), ("running_var", &mut state.var)]
            {
                let id = format!("{name}.{suffix}");
                let found = entries
                    .iter()
                    .find(|(eid, _)| *eid == id)
                    .ok_or_else(|| Error::Checkpoint(format!("missing {id}")))?;
                if found.1.data.len() != slot.len() {
                    return Err(Error::Checkpoint(format!("shape mismatch for {id}")));
                }
                slot.copy_from_slice(&found.1.data);
            }
        }
        Ok(())
    }

    fn apply_norm(
        &mut self,
        tape: &mut Tape,
        node: NodeId,
        site: &NormSite,
        mode: Mode,
    ) -> Result<NodeId> {
        let scale = tape.param(&self.params, site.scale);
        let shift = tape.param(&self.params, site.shift);
        match site.state {
            Some(idx) => tape.batch_norm(node, scale, shift, &mut self.norm_states[idx], mode),
            None => tape.layer_norm(node, scale, shift),
        }
    }

    /// Full forward pass to pre-sigmoid logits (N x C). Sigmoid is applied
    /// only downstream, inside the loss and the metric scoring.
    pub fn forward(
        &mut self,
        adj: &Rc<NormalizedAdjacency>,
        features: &Tensor2,
        mode: Mode,
        rng: &mut impl Rng,
        tape: &mut Tape,
    ) -> Result<NodeId> {
        if features.cols != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, graph has {}",
                self.input_dim, features.cols
            )));
        }
        let x = tape.input(features.clone());
        let w_in = tape.param(&self.params, self.arch.w_in);
        let h0 = tape.matmul(x, w_in)?;
        let rate = self.config.dropout_rate;

        match self.config.backbone {
            Backbone::Gcn => {
                let k = self.config.depth;
                let mut h = h0;
                let layers = self.arch.layers.clone();
                for (i, layer) in layers.iter().enumerate() {
                    let is_output = i + 1 == k;
                    let prev = h;
                    let mut t = tape.spmm(adj, h)?;
                    let w = tape.param(&self.params, layer.weight.unwrap());
                    let b = tape.param(&self.params, layer.bias.unwrap());
                    t = tape.linear(t, w, Some(b))?;
                    if self.config.residual {
                        let r = match layer.res_proj {
                            Some(p) => {
                                let proj = tape.param(&self.params, p);
                                tape.matmul(prev, proj)?
                            }
                            None => prev,
                        };
                        t = tape.add(t, r)?;
                    }
                    if is_output {
                        h = t;
                    } else {
                        if let Some(site) = &layer.norm {
                            t = self.apply_norm(tape, t, site, mode)?;
                        }
                        t = tape.relu(t);
                        h = tape.dropout(t, rate, mode, rng)?;
                    }
                }
                Ok(h)
            }
            Backbone::SsgConv => {
                let k = self.config.depth;
                let alpha = self.config.ssg_alpha;
                let layers = self.arch.layers.clone();
                let mut p = h0;
                let mut acc: Option<NodeId> = None;
                for layer in layers.iter() {
                    let prev = p;
                    p = tape.spmm(adj, p)?;
                    let a = tape.scale(p, 1.0 - alpha);
                    let b = tape.scale(h0, alpha);
                    let mut term = tape.add(a, b)?;
                    if self.config.residual {
                        term = tape.add(term, prev)?;
                    }
                    if let Some(site) = &layer.norm {
                        term = self.apply_norm(tape, term, site, mode)?;
                    }
                    term = tape.dropout(term, rate, mode, rng)?;
                    acc = Some(match acc {
                        Some(s) => tape.add(s, term)?,
                        None => term,
                    });
                }
                let mean = tape.scale(acc.expect("depth >= 1"), 1.0 / k as f64);
                let (wh, bh) = self.arch.head.expect("ssg head");
                let w = tape.param(&self.params, wh);
                let b = tape.param(&self.params, bh);
                tape.linear(mean, w, Some(b))
            }
            Backbone::Gcnii => {
                let alpha = self.config.gcnii_alpha;
                let lambda = self.config.gcnii_lambda;
                let layers = self.arch.layers.clone();
                let mut h = h0;
                for (i, layer) in layers.iter().enumerate() {
                    let beta = gcnii_beta(lambda, i + 1);
                    let prev = h;
                    let ah = tape.spmm(adj, h)?;
                    let za = tape.scale(ah, 1.0 - alpha);
                    let zb = tape.scale(h0, alpha);
                    let z = tape.add(za, zb)?;
                    let w = tape.param(&self.params, layer.weight.unwrap());
                    let zw = tape.matmul(z, w)?;
                    let sa = tape.scale(z, 1.0 - beta);
                    let sb = tape.scale(zw, beta);
                    let mut s = tape.add(sa, sb)?;
                    if self.config.residual {
                        s = tape.add(s, prev)?;
                    }
                    if let Some(site) = &layer.norm {
                        s = self.apply_norm(tape, s, site, mode)?;
                    }
                    s = tape.relu(s);
                    h = tape.dropout(s, rate, mode, rng)?;
                }
                let (wh, bh) = self.arch.head.expect("gcnii head");
                let w = tape.param(&self.params, wh);
                let b = tape.param(&self.params, bh);
                tape.linear(h, w, Some(b))
            }
        }
    }

    /// Eval-mode logits as a plain tensor (no dropout, frozen norm stats).
    pub fn infer(&mut self, adj: &Rc<NormalizedAdjacency>, features: &Tensor2) -> Result<Tensor2> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = self.forward(adj, features, Mode::Eval, &mut rng, &mut tape)?;
        Ok(tape.value(logits).clone())
    }
}
