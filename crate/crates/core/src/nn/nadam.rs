//! Nesterov-accelerated Adam with a constant momentum schedule:
//!
//! ```text
//! m ← β₁ m + (1 − β₁) g
//! v ← β₂ v + (1 − β₂) g²
//! m̂ = β₁ m / (1 − β₁^{t+1}) + (1 − β₁) g / (1 − β₁^t)
//! θ ← θ − η m̂ / (√(v / (1 − β₂^t)) + ε)
//! ```

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::network::{gather_flat, scatter_flat};
use super::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NadamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: NadamConfig,
}

impl NadamState {
    pub fn new(len: usize, config: NadamConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }
}

/// One update in place. Gradients are checked for finiteness before anything
/// is modified; the error carries the offending flat index.
pub fn nadam_step(params: &mut [f64], grads: &[f64], state: &mut NadamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::argument(format!(
            "nadam: {} parameters, {} gradients, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at flat index {i}")));
    }
    state.t += 1;
    let NadamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = state.config;
    let t = state.t as i32;
    let bc1_next = 1.0 - b1.powi(t + 1);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = b1 * *m / bc1_next + (1.0 - b1) * g / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Nadam over the concatenated parameters of several networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub state: NadamState,
    blocks: Vec<(String, Range<usize>)>,
}

impl Optimizer {
    pub fn new(named: &[(&str, &Network)], config: NadamConfig) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (name, net) in named {
            for (block, range) in net.param_blocks() {
                blocks.push((format!("{name}.{block}"), range.start + offset..range.end + offset));
            }
            offset += net.num_params();
        }
        Self {
            state: NadamState::new(offset, config),
            blocks,
        }
    }

    /// Applies the gradients currently stored in the networks.
    pub fn step(&mut self, nets: &mut [&mut Network]) -> Result<()> {
        let views: Vec<&Network> = nets.iter().map(|n| &**n).collect();
        let grads = gather_flat(&views, true);
        let mut params = gather_flat(&views, false);
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            let block = self
                .blocks
                .iter()
                .find(|(_, r)| r.contains(&i))
                .map(|(n, _)| n.as_str())
                .unwrap_or("?");
            return Err(Error::Numeric(format!(
                "non-finite gradient in parameter block {block}"
            )));
        }
        nadam_step(&mut params, &grads, &mut self.state)?;
        scatter_flat(nets, &params);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        let mut state = NadamState::new(3, NadamConfig::default());
        nadam_step(&mut params, &[0.0; 3], &mut state).unwrap();
        assert_eq!(params, before);
        assert!(state.m.iter().chain(state.v.iter()).all(|&v| v == 0.0));
        assert_eq!(state.t, 1);
    }

    #[test]
    fn defaults() {
        let c = NadamConfig::default();
        assert_eq!((c.learning_rate, c.beta1, c.beta2), (1e-3, 0.9, 0.999));
    }

    #[test]
    fn non_finite_gradient_leaves_state_untouched() {
        let mut params = vec![1.0, 1.0];
        let mut state = NadamState::new(2, NadamConfig::default());
        let err = nadam_step(&mut params, &[0.0, f64::NAN], &mut state).unwrap_err();
        assert!(err.to_string().contains("index 1"));
        assert_eq!(state.t, 0);
        assert_eq!(params, vec![1.0, 1.0]);
    }
}
