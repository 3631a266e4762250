//! Differentiable primitives over a reverse-mode tape, plus Adam and
//! parameter checkpointing.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod tape;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use tape::{sigmoid, NodeId, Tape};

use crate::tensor::Tensor2;

/// Forward-pass mode. Controls dropout and which batch-norm statistics apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub id: String,
    pub value: Tensor2,
    pub grad: Tensor2,
}

impl Param {
    pub fn new(id: impl Into<String>, value: Tensor2) -> Self {
        let grad = Tensor2::zeros(value.rows, value.cols);
        Param {
            id: id.into(),
            value,
            grad,
        }
    }
}

/// Flat parameter store; tape nodes reference params by index.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    pub params: Vec<Param>,
}

pub type ParamId = usize;

impl ParamSet {
    pub fn add(&mut self, param: Param) -> ParamId {
        self.params.push(param);
        self.params.len() - 1
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.iter_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Exponential-moving batch statistics for batch norm at eval time.
#[derive(Debug, Clone)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub momentum: f64,
}

impl RunningStats {
    pub fn new(width: usize) -> Self {
        RunningStats {
            mean: vec![0.0; width],
            var: vec![1.0; width],
            momentum: 0.1,
        }
    }
}

pub const NORM_EPS: f64 = 1e-5;
