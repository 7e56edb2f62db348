use serde::{Deserialize, Serialize};

use super::model::{param_name, DenseParams, Gradients, MlpModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for every dense layer of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    m: Vec<DenseParams>,
    v: Vec<DenseParams>,
}

impl AdamState {
    pub fn new(model: &MlpModel, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) || !config.lr.is_finite() {
            return Err(Error::invalid(format!("learning rate {} must be positive", config.lr)));
        }
        let zeros: Vec<DenseParams> = model.params().iter().map(DenseParams::zeros_like).collect();
        Ok(Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of every parameter. Nothing is modified
    /// when any gradient is non-finite or mis-shaped.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        if grads.dense.len() != self.m.len() {
            return Err(Error::shape("adam_step", "gradient count does not match the model"));
        }
        for (i, (g, m)) in grads.dense.iter().zip(&self.m).enumerate() {
            if g.weight.shape() != m.weight.shape() || g.bias.shape() != m.bias.shape() {
                return Err(Error::shape("adam_step", format!("gradient shape mismatch at dense layer {i}")));
            }
            if !g.weight.is_finite() {
                return Err(Error::NonFiniteGradient(param_name(i, true)));
            }
            if !g.bias.is_finite() {
                return Err(Error::NonFiniteGradient(param_name(i, false)));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let update = |theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for (((th, m), v), &g) in theta.iter_mut().zip(m).zip(v).zip(g) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *th -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (((p, m), v), g) in model
            .params_mut()
            .iter_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(&grads.dense)
        {
            update(p.weight.data_mut(), m.weight.data_mut(), v.weight.data_mut(), g.weight.data());
            update(p.bias.data_mut(), m.bias.data_mut(), v.bias.data_mut(), g.bias.data());
        }
        Ok(())
    }
}
