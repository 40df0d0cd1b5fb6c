use serde::{Deserialize, Serialize};

use super::pipeline::{Gradients, PipelineParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one flat buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// Zeroed state for tensors of the given lengths.
    pub fn with_shapes(lengths: impl IntoIterator<Item = usize>) -> Self {
        let first: Vec<Vec<f64>> = lengths.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn for_params(theta: &PipelineParams) -> Self {
        Self::with_shapes(theta.tensors().iter().map(|t| t.len()))
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over matching parameter/gradient tensors.
    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, cfg: &AdamConfig) {
        assert_eq!(params.len(), self.first.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.first.len(), "tensor count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
}

/// Applies one Adam step to the whole pipeline in place.
pub fn adam_step(theta: &mut PipelineParams, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    state.update(theta.tensors_mut(), grads.tensors(), cfg);
}
