//! Reverse-mode tape. Each primitive records the state its backward rule
//! needs; `backward` walks the records in reverse and accumulates parameter
//! gradients.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::nn::{Mode, ParamId, ParamSet, RunningStats, NORM_EPS};
use crate::tensor::Tensor2;
use rand::Rng;

pub type NodeId = usize;

enum Op {
    /// Constant leaf, no gradient.
    Input,
    /// Leaf bound to a parameter; backward accumulates into its grad.
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// N x b matrix plus 1 x b row broadcast.
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Sigmoid(NodeId),
    Spmm(Rc<NormalizedAdjacency>, NodeId),
    Norm {
        input: NodeId,
        scale: NodeId,
        shift: NodeId,
        xhat: Tensor2,
        inv_std: Vec<f64>,
        axis: NormAxis,
        /// True when inv_std came from the batch itself (train-mode BN, LN);
        /// false for frozen running stats, where stats are constants.
        batch_stats: bool,
    },
    Dropout {
        input: NodeId,
        mask: Vec<f64>,
    },
    BceFromLogits {
        logits: NodeId,
        target: Rc<Tensor2>,
        rows: Rc<Vec<usize>>,
    },
}

#[derive(Clone, Copy, PartialEq)]
enum NormAxis {
    /// Normalize each column over the N rows (batch norm).
    Column,
    /// Normalize each row over the h columns (layer norm).
    Row,
}

struct Node {
    op: Op,
    value: Tensor2,
}

/// Ordered record of primitive applications for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.data.len(), 1);
        self.nodes[id].value.data[0]
    }

    fn push(&mut self, op: Op, value: Tensor2) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Tensor2) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(Op::Param(id), params.params[id].value.clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.value(a).scale(s);
        self.push(Op::Scale(a, s), value)
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let b = self.value(bias);
        let x = self.value(a);
        if b.rows != 1 || b.cols != x.cols {
            return Err(Error::ShapeMismatch(format!(
                "bias {}x{} against {}x{}",
                b.rows, b.cols, x.rows, x.cols
            )));
        }
        let mut value = x.clone();
        for i in 0..value.rows {
            for j in 0..value.cols {
                value.data[i * value.cols + j] += b.data[j];
            }
        }
        Ok(self.push(Op::AddBias(a, bias), value))
    }

    /// Affine map: input * weight (+ bias).
    pub fn linear(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    ) -> Result<NodeId> {
        let out = self.matmul(input, weight)?;
        match bias {
            Some(b) => self.add_bias(out, b),
            None => Ok(out),
        }
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = Tensor2 {
            rows: self.value(a).rows,
            cols: self.value(a).cols,
            data: self.value(a).data.iter().map(|&v| v.max(0.0)).collect(),
        };
        self.push(Op::Relu(a), value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = Tensor2 {
            rows: self.value(a).rows,
            cols: self.value(a).cols,
            data: self.value(a).data.iter().map(|&v| sigmoid(v)).collect(),
        };
        self.push(Op::Sigmoid(a), value)
    }

    pub fn spmm(&mut self, adj: &Rc<NormalizedAdjacency>, a: NodeId) -> Result<NodeId> {
        let value = adj.spmm(self.value(a))?;
        Ok(self.push(Op::Spmm(Rc::clone(adj), a), value))
    }

    /// Batch norm over the node dimension (per-column statistics, biased
    /// variance). Train mode updates `state`; eval mode freezes it.
    pub fn batch_norm(
        &mut self,
        input: NodeId,
        scale: NodeId,
        shift: NodeId,
        state: &mut RunningStats,
        mode: Mode,
    ) -> Result<NodeId> {
        let x = self.value(input);
        let (n, h) = x.shape();
        if state.mean.len() != h {
            return Err(Error::ShapeMismatch(format!(
                "batch norm state width {} vs input {}",
                state.mean.len(),
                h
            )));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::InvalidConfig(
                        "batch norm needs at least 2 rows in train mode".into(),
                    ));
                }
                let mut mean = vec![0.0; h];
                let mut var = vec![0.0; h];
                for i in 0..n {
                    for j in 0..h {
                        mean[j] += x.get(i, j);
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                for i in 0..n {
                    for j in 0..h {
                        let d = x.get(i, j) - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                for j in 0..h {
                    state.mean[j] = (1.0 - state.momentum) * state.mean[j] + state.momentum * mean[j];
                    state.var[j] = (1.0 - state.momentum) * state.var[j] + state.momentum * var[j];
                }
                (mean, var)
            }
            Mode::Eval => (state.mean.clone(), state.var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
        let mut xhat = Tensor2::zeros(n, h);
        for i in 0..n {
            for j in 0..h {
                xhat.set(i, j, (x.get(i, j) - mean[j]) * inv_std[j]);
            }
        }
        self.affine_norm(input, scale, shift, xhat, inv_std, NormAxis::Column, mode == Mode::Train)
    }

    /// Layer norm: each row normalized over its features, biased variance.
    pub fn layer_norm(&mut self, input: NodeId, scale: NodeId, shift: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let (n, h) = x.shape();
        if h < 2 {
            return Err(Error::InvalidConfig(
                "layer norm needs at least 2 features".into(),
            ));
        }
        let mut xhat = Tensor2::zeros(n, h);
        let mut inv_std = vec![0.0; n];
        for i in 0..n {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[i] = is;
            for j in 0..h {
                xhat.set(i, j, (row[j] - mean) * is);
            }
        }
        self.affine_norm(input, scale, shift, xhat, inv_std, NormAxis::Row, true)
    }

    fn affine_norm(
        &mut self,
        input: NodeId,
        scale: NodeId,
        shift: NodeId,
        xhat: Tensor2,
        inv_std: Vec<f64>,
        axis: NormAxis,
        batch_stats: bool,
    ) -> Result<NodeId> {
        let (n, h) = xhat.shape();
        let gamma = self.value(scale);
        let beta = self.value(shift);
        if gamma.data.len() != h || beta.data.len() != h {
            return Err(Error::ShapeMismatch(format!(
                "norm scale/shift width vs input width {h}"
            )));
        }
        let mut value = Tensor2::zeros(n, h);
        for i in 0..n {
            for j in 0..h {
                value.set(i, j, gamma.data[j] * xhat.get(i, j) + beta.data[j]);
            }
        }
        Ok(self.push(
            Op::Norm {
                input,
                scale,
                shift,
                xhat,
                inv_std,
                axis,
                batch_stats,
            },
            value,
        ))
    }

    /// Inverted dropout: train mode zeroes entries with probability `rate`
    /// and scales survivors by 1/(1-rate); eval mode is the identity (the
    /// input node is returned unchanged).
    pub fn dropout(
        &mut self,
        input: NodeId,
        rate: f64,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {rate}")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(input);
        }
        let keep = 1.0 / (1.0 - rate);
        let x = self.value(input);
        let mask: Vec<f64> = (0..x.data.len())
            .map(|_| if rng.gen_bool(rate) { 0.0 } else { keep })
            .collect();
        let value = Tensor2 {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
        };
        Ok(self.push(Op::Dropout { input, mask }, value))
    }

    /// Summed binary cross-entropy from logits over the masked rows, in the
    /// fused stable form max(z,0) - z*y + log(1+exp(-|z|)).
    pub fn bce_from_logits(
        &mut self,
        logits: NodeId,
        target: &Rc<Tensor2>,
        rows: &Rc<Vec<usize>>,
    ) -> Result<NodeId> {
        let z = self.value(logits);
        if !z.same_shape(target) {
            return Err(Error::ShapeMismatch(format!(
                "bce logits {}x{} vs target {}x{}",
                z.rows, z.cols, target.rows, target.cols
            )));
        }
        if rows.is_empty() {
            return Err(Error::InvalidConfig("bce: empty row mask".into()));
        }
        let mut loss = 0.0;
        for &i in rows.iter() {
            for c in 0..z.cols {
                let zv = z.get(i, c);
                let y = target.get(i, c);
                loss += zv.max(0.0) - zv * y + (-zv.abs()).exp().ln_1p();
            }
        }
        Ok(self.push(
            Op::BceFromLogits {
                logits,
                target: Rc::clone(target),
                rows: Rc::clone(rows),
            },
            Tensor2::from_vec(1, 1, vec![loss]),
        ))
    }

    /// Reverse sweep from `root` (a scalar node). Parameter gradients are
    /// accumulated into `params` on top of whatever is already there; call
    /// `params.zero_grads()` first for a fresh pass.
    pub fn backward(&self, root: NodeId, params: &mut ParamSet) -> Result<()> {
        let root_val = self.value(root);
        if root_val.data.len() != 1 {
            return Err(Error::InvalidConfig("backward root must be scalar".into()));
        }
        if !root_val.is_finite() {
            return Err(Error::Other("backward from non-finite loss".into()));
        }
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Tensor2::ones(root_val.rows, root_val.cols));

        for id in (0..=root).rev() {
            let dy = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Param(pid) => {
                    params.params[*pid].grad.add_assign(&dy);
                }
                Op::MatMul(a, b) => {
                    let da = dy.matmul_t(self.value(*b))?;
                    let db = self.value(*a).t_matmul(&dy)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(a, bias) => {
                    let mut db = Tensor2::zeros(1, dy.cols);
                    for i in 0..dy.rows {
                        for j in 0..dy.cols {
                            db.data[j] += dy.get(i, j);
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *a, dy);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, dy.clone());
                    accumulate(&mut grads, *b, dy);
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads, *a, dy.scale(*s));
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let data = dy
                        .data
                        .iter()
                        .zip(&x.data)
                        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(
                        &mut grads,
                        *a,
                        Tensor2 {
                            rows: dy.rows,
                            cols: dy.cols,
                            data,
                        },
                    );
                }
                Op::Sigmoid(a) => {
                    let s = &self.nodes[id].value;
                    let data = dy
                        .data
                        .iter()
                        .zip(&s.data)
                        .map(|(&g, &sv)| g * sv * (1.0 - sv))
                        .collect();
                    accumulate(
                        &mut grads,
                        *a,
                        Tensor2 {
                            rows: dy.rows,
                            cols: dy.cols,
                            data,
                        },
                    );
                }
                Op::Spmm(adj, a) => {
                    // adjacency is symmetric, so A^T dy = A dy
                    accumulate(&mut grads, *a, adj.spmm(&dy)?);
                }
                Op::Norm {
                    input,
                    scale,
                    shift,
                    xhat,
                    inv_std,
                    axis,
                    batch_stats,
                } => {
                    let (n, h) = xhat.shape();
                    let gamma = self.value(*scale);
                    let mut dgamma = Tensor2::zeros(1, h);
                    let mut dbeta = Tensor2::zeros(1, h);
                    for i in 0..n {
                        for j in 0..h {
                            dgamma.data[j] += dy.get(i, j) * xhat.get(i, j);
                            dbeta.data[j] += dy.get(i, j);
                        }
                    }
                    let mut dx = Tensor2::zeros(n, h);
                    match axis {
                        NormAxis::Column => {
                            if *batch_stats {
                                for j in 0..h {
                                    let g = gamma.data[j];
                                    let mut sum_dxhat = 0.0;
                                    let mut sum_dxhat_xhat = 0.0;
                                    for i in 0..n {
                                        let d = dy.get(i, j) * g;
                                        sum_dxhat += d;
                                        sum_dxhat_xhat += d * xhat.get(i, j);
                                    }
                                    let nf = n as f64;
                                    for i in 0..n {
                                        let d = dy.get(i, j) * g;
                                        dx.set(
                                            i,
                                            j,
                                            inv_std[j] / nf
                                                * (nf * d
                                                    - sum_dxhat
                                                    - xhat.get(i, j) * sum_dxhat_xhat),
                                        );
                                    }
                                }
                            } else {
                                // frozen stats: plain affine map
                                for j in 0..h {
                                    let k = gamma.data[j] * inv_std[j];
                                    for i in 0..n {
                                        dx.set(i, j, dy.get(i, j) * k);
                                    }
                                }
                            }
                        }
                        NormAxis::Row => {
                            let hf = h as f64;
                            for i in 0..n {
                                let mut sum_dxhat = 0.0;
                                let mut sum_dxhat_xhat = 0.0;
                                for j in 0..h {
                                    let d = dy.get(i, j) * gamma.data[j];
                                    sum_dxhat += d;
                                    sum_dxhat_xhat += d * xhat.get(i, j);
                                }
                                for j in 0..h {
                                    let d = dy.get(i, j) * gamma.data[j];
                                    dx.set(
                                        i,
                                        j,
                                        inv_std[i] / hf
                                            * (hf * d - sum_dxhat - xhat.get(i, j) * sum_dxhat_xhat),
                                    );
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *scale, dgamma);
                    accumulate(&mut grads, *shift, dbeta);
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dropout { input, mask } => {
                    let data = dy.data.iter().zip(mask).map(|(g, m)| g * m).collect();
                    accumulate(
                        &mut grads,
                        *input,
                        Tensor2 {
                            rows: dy.rows,
                            cols: dy.cols,
                            data,
                        },
                    );
                }
                Op::BceFromLogits {
                    logits,
                    target,
                    rows,
                } => {
                    let upstream = dy.data[0];
                    let z = self.value(*logits);
                    let mut dz = Tensor2::zeros(z.rows, z.cols);
                    for &i in rows.iter() {
                        for c in 0..z.cols {
                            let s = sigmoid(z.get(i, c));
                            dz.set(i, c, upstream * (s - target.get(i, c)));
                        }
                    }
                    accumulate(&mut grads, *logits, dz);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor2>], id: NodeId, delta: Tensor2) {
    match &mut grads[id] {
        Some(g) => g.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
