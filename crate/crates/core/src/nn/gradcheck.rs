//! Central-finite-difference gradient checking, used by the test suites to
//! validate tape backward rules end to end. Independent of the tape: it only
//! perturbs parameter values and re-evaluates a loss closure.

use crate::nn::ParamSet;

pub const FD_STEP: f64 = 1e-5;

/// Numerical gradient of `loss` w.r.t. every parameter entry, central
/// differences with step `h`. Returns one flat Vec per parameter.
pub fn finite_diff_grads<F>(params: &mut ParamSet, h: f64, mut loss: F) -> Vec<Vec<f64>>
where
    F: FnMut(&mut ParamSet) -> f64,
{
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let n = params.params[pi].value.data.len();
        let mut grads = vec![0.0; n];
        for k in 0..n {
            let orig = params.params[pi].value.data[k];
            params.params[pi].value.data[k] = orig + h;
            let up = loss(params);
            params.params[pi].value.data[k] = orig - h;
            let down = loss(params);
            params.params[pi].value.data[k] = orig;
            grads[k] = (up - down) / (2.0 * h);
        }
        out.push(grads);
    }
    out
}

/// Max relative error between analytic grads (already in `params[i].grad`)
/// and the numeric grads, with an absolute floor for near-zero entries.
pub fn max_rel_error(params: &ParamSet, numeric: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, num) in params.params.iter().zip(numeric) {
        for (&a, &n) in p.grad.data.iter().zip(num) {
            // floor sized so central-difference round-off (~1e-10 at h=1e-5
            // on O(10) losses) cannot dominate near-zero gradients
            let denom = a.abs().max(n.abs()).max(1e-3);
            worst = worst.max((a - n).abs() / denom);
        }
    }
    worst
}
