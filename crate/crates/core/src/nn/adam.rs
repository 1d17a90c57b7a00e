use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
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

/// First/second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        let n = params.values().len();
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam step of size `lr` against `grads`.
///
/// Nothing is modified when a gradient is not finite.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let n = params.values().len();
    if grads.0.len() != n || state.first.len() != n || state.second.len() != n {
        return Err(Error::Dimension {
            context: "adam step",
            expected: n,
            got: grads.0.len(),
        });
    }
    if !grads.0.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(beta1, t);
    let c2 = 1.0 - libm::pow(beta2, t);
    let moments = state.first.iter_mut().zip(state.second.iter_mut());
    for ((p, g), (m, v)) in params.values_mut().iter_mut().zip(&grads.0).zip(moments) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    }
    Ok(())
}
