//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    first_moment: Vec<Tensor2>,
    second_moment: Vec<Tensor2>,
}

impl AdamState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let first_moment = params
            .params
            .iter()
            .map(|p| Tensor2::zeros(p.value.rows, p.value.cols))
            .collect();
        let second_moment = params
            .params
            .iter()
            .map(|p| Tensor2::zeros(p.value.rows, p.value.cols))
            .collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment,
            second_moment,
        }
    }

    /// One update: m-hat = m/(1-b1^t), v-hat = v/(1-b2^t),
    /// theta <- theta - lr * m-hat / (sqrt(v-hat) + eps).
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::InvalidConfig(
                "adam state built for a different parameter set".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (idx, p) in params.params.iter_mut().enumerate() {
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            for k in 0..p.value.data.len() {
                let g = p.grad.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * g;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data[k] / bc1;
                let v_hat = v.data[k] / bc2;
                p.value.data[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
