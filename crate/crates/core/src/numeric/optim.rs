use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay, applied as `lr * weight_decay * p`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// Adam moments for every trainable parameter of a store.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: HashMap<String, Tensor>,
    pub second_moment: HashMap<String, Tensor>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParameterStore) -> Self {
        let mut first_moment = HashMap::new();
        let mut second_moment = HashMap::new();
        for p in params.iter().filter(|p| p.trainable) {
            first_moment.insert(p.name.clone(), Tensor::zeros(&p.tensor.shape));
            second_moment.insert(p.name.clone(), Tensor::zeros(&p.tensor.shape));
        }
        Self {
            config,
            first_moment,
            second_moment,
            step_count: 0,
        }
    }
}

/// Applies one bias-corrected Adam update in place.
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * param[i]);
    }
}

/// One optimizer step over every trainable parameter using its gradient slot.
///
/// A non-finite gradient aborts the step before anything is written.
pub fn adam_step(params: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
    for p in params.iter().filter(|p| p.trainable) {
        if let Some(g) = &p.tensor.grad {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
    }
    state.step_count += 1;
    let step = state.step_count;
    let cfg = state.config;
    for p in params.iter_mut().filter(|p| p.trainable) {
        let Some(grad) = p.tensor.grad.as_deref() else {
            continue;
        };
        let m = state
            .first_moment
            .entry(p.name.clone())
            .or_insert_with(|| Tensor::zeros(&p.tensor.shape));
        let v = state
            .second_moment
            .entry(p.name.clone())
            .or_insert_with(|| Tensor::zeros(&p.tensor.shape));
        if m.shape != p.tensor.shape || v.shape != p.tensor.shape {
            return Err(Error::Shape(format!(
                "adam moments for `{}` have shape {:?}, parameter has {:?}",
                p.name, m.shape, p.tensor.shape
            )));
        }
        adam_update(&mut p.tensor.data, grad, &mut m.data, &mut v.data, step, &cfg);
    }
    params.version += 1;
    Ok(())
}

/// Global L2 norm over a set of gradient buffers.
pub fn global_norm(grads: &[&mut [f64]]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}
