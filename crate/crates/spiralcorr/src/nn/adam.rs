//! Bias-corrected Adam over named parameter blocks.

use thiserror::Error;

use super::tensor::Tensor;
use super::ParamBlocks;

/// Defaults used throughout: lr 0.001, beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("non-finite gradient in block '{block}'")]
    NonFiniteGradient { block: String },
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<M: ParamBlocks>(model: &M, config: AdamConfig) -> Self {
        let m = (0..model.num_blocks())
            .map(|b| Tensor::zeros(model.block(b).shape()))
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState { config, t: 0, m, v }
    }

    /// One update over every block. Gradients must align with the model's
    /// block order; a non-finite gradient aborts before touching anything.
    pub fn step<M: ParamBlocks>(
        &mut self,
        model: &mut M,
        grads: &[&Tensor],
    ) -> Result<(), AdamError> {
        assert_eq!(
            grads.len(),
            model.num_blocks(),
            "gradient block count mismatch"
        );
        for (b, g) in grads.iter().enumerate() {
            if g.has_non_finite() {
                return Err(AdamError::NonFiniteGradient {
                    block: model.block_names()[b].clone(),
                });
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (b, g) in grads.iter().enumerate() {
            let m = self.m[b].data_mut();
            let v = self.v[b].data_mut();
            let p = model.block_mut(b).data_mut();
            for ((pv, mv), (vv, &gv)) in p
                .iter_mut()
                .zip(m.iter_mut())
                .zip(v.iter_mut().zip(g.data()))
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
