use serde::{Deserialize, Serialize};

use super::{Gradients, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Self {
            config,
            first: params.zero_grads(),
            second: params.zero_grads(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam step. Non-finite gradients are rejected before
/// anything is modified.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if grads.len() != params.layers.len() || state.first.len() != params.layers.len() {
        return Err(Error::Shape("gradient/optimizer depth mismatch".into()));
    }
    for (l, (p, g)) in params.layers.iter().zip(grads).enumerate() {
        if p.weights.dim() != g.weights.dim() || p.bias.dim() != g.bias.dim() {
            return Err(Error::Shape(format!("gradient shape mismatch at layer {l}")));
        }
        if !g.all_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at layer {l}")));
        }
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    };
    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        ndarray::Zip::from(&mut p.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut p.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
