use serde::{Deserialize, Serialize};

use super::network::{GradientSet, Network};
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment accumulators, shaped like the network they update.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first: GradientSet,
    second: GradientSet,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, net: &Network) -> Self {
        Self {
            config,
            step: 0,
            first: GradientSet::zeros_like(net),
            second: GradientSet::zeros_like(net),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update of `net` along `grads`.
    pub fn apply(&mut self, net: &mut Network, grads: &GradientSet) -> Result<()> {
        let congruent = grads.layers.len() == self.first.layers.len()
            && grads
                .slices()
                .zip(self.first.slices())
                .all(|(g, m)| g.len() == m.len());
        if !congruent {
            return Err(Error::config("gradient shape does not match optimizer state"));
        }
        if !grads.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite gradient at optimizer step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let params = net.param_slices_mut();
        let moments = self.first.slices_mut().zip(self.second.slices_mut());
        for ((p, g), (m, v)) in params.zip(grads.slices()).zip(moments) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
