use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment accumulators for Adam, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| vec![0.0; t.numel()]).collect();
        AdamState { config, step: 0, first_moment: zeros(), second_moment: zeros() }
    }
}

/// One bias-corrected Adam update at learning rate `lr`. Gradients are read,
/// never modified.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.first_moment.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer tracks {} tensors, store has {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    for id in params.ids() {
        let t = params.tensor(id);
        if t.grad().is_none() {
            return Err(Error::Contract(format!("parameter `{}` has no gradient", params.name(id))));
        }
        if state.first_moment[id.index()].len() != t.numel() {
            return Err(Error::Contract(format!("moment shape mismatch for `{}`", params.name(id))));
        }
    }

    state.step += 1;
    let AdamConfig { beta1, beta2, epsilon, .. } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for id in params.ids() {
        let i = id.index();
        let tensor = params.tensor_mut(id);
        let grad = tensor.grad().unwrap().to_vec();
        let (m, v) = (&mut state.first_moment[i], &mut state.second_moment[i]);
        for (k, p) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
