use serde::{Deserialize, Serialize};

use super::Gradients;
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamGroup};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Overrides for the filter coefficients (alpha, beta, gamma).
    pub coeff_lr: Option<f64>,
    pub coeff_weight_decay: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            coeff_lr: None,
            coeff_weight_decay: None,
        }
    }
}

impl AdamConfig {
    fn group(&self, g: ParamGroup) -> (f64, f64) {
        match g {
            ParamGroup::Weights => (self.lr, self.weight_decay),
            ParamGroup::Coefficients => (
                self.coeff_lr.unwrap_or(self.lr),
                self.coeff_weight_decay.unwrap_or(self.weight_decay),
            ),
        }
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected adaptive-moment step with decoupled weight decay.
///
/// Tensors for which `frozen(name)` returns true are left untouched, moments
/// included. Non-finite gradients abort the step before anything changes.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
    frozen: impl Fn(&str) -> bool,
) -> Result<()> {
    for (name, _, g) in grads.tensors() {
        if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of `{name}` at index {pos} ({})",
                g[pos]
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    for ((((name, group, p), (_, _, g)), (_, _, m)), (_, _, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(g_all)
        .zip(m_all)
        .zip(v_all)
    {
        if frozen(&name) {
            continue;
        }
        let (lr, wd) = cfg.group(group);
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * wd * p[i];
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
