//! Bias-corrected Adam.

use super::layers::Parameter;
use super::matrix::Matrix;
use crate::error::{McgError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
}

impl AdamState {
    pub fn for_param(p: &Parameter) -> Self {
        let (r, c) = p.value.shape();
        AdamState {
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
            step: 0,
        }
    }
}

/// Applies one Adam update to every parameter. Gradients are left intact.
pub fn adam_step(params: &mut [&mut Parameter], states: &mut [AdamState], cfg: AdamConfig) -> Result<()> {
    if params.len() != states.len() {
        return Err(McgError::arg(format!(
            "adam_step got {} parameters but {} states",
            params.len(),
            states.len()
        )));
    }
    for (p, s) in params.iter_mut().zip(states.iter_mut()) {
        if s.m.shape() != p.value.shape() {
            return Err(McgError::Dimension {
                op: "adam_step",
                left: p.value.shape(),
                right: s.m.shape(),
            });
        }
        s.step += 1;
        let t = s.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let grad = p.grad.data();
        let value = p.value.data_mut();
        let m = s.m.data_mut();
        let v = s.v.data_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
