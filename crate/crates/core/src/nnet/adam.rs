use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named, ordered views over a model's trainable arrays.
///
/// Gradients use the same type as the parameters, so block `i` of the
/// gradient lines up with block `i` of the parameters.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<(&'static str, &[f64])>;
    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled: `param −= lr · weight_decay · param` before the Adam update.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moments: Vec<Vec<f64>>,
    pub second_moments: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new<P: ParamBlocks>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
        Self {
            config,
            first_moments: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moments: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }
}

/// One AdamW step. Fails without touching anything if a gradient is non-finite.
pub fn adam_step<P: ParamBlocks>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let grad_blocks = grads.blocks();
    let mut param_blocks = params.blocks_mut();
    if grad_blocks.len() != param_blocks.len() || param_blocks.len() != state.first_moments.len() {
        return Err(Error::Contract("parameter, gradient and optimizer blocks differ".into()));
    }
    for ((name, g), (_, p)) in grad_blocks.iter().zip(&param_blocks) {
        if g.len() != p.len() {
            return Err(Error::Contract(format!("gradient block {name} has the wrong length")));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient in {name}[{i}]")));
        }
    }

    let c = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (b, ((_, p), (_, g))) in param_blocks.iter_mut().zip(&grad_blocks).enumerate() {
        let m = &mut state.first_moments[b];
        let v = &mut state.second_moments[b];
        for i in 0..p.len() {
            p[i] -= c.lr * c.weight_decay * p[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
    Ok(())
}
