use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use crate::error::{KgeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter in the store.
///
/// Gradients are read but not cleared. If any gradient holds a non-finite
/// entry the store is left untouched.
pub fn adam_step(store: &mut ParameterStore, cfg: &AdamConfig) -> Result<()> {
    if let Some((name, _)) = store.iter().find(|(_, p)| !p.grad.is_finite()) {
        return Err(KgeError::NonFinite(format!("gradient of `{name}`")));
    }
    let t = store.step() + 1;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (_, p) in store.iter_mut() {
        let grads = p.grad.data();
        let m = p.m.data_mut();
        for (mi, &g) in m.iter_mut().zip(grads) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
        }
        let v = p.v.data_mut();
        for (vi, &g) in v.iter_mut().zip(grads) {
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
        }
        let (m, v) = (p.m.data(), p.v.data());
        for ((x, &mi), &vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            *x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    store.set_step(t);
    Ok(())
}
