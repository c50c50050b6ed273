use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter in a store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|(_, v, _)| Tensor::zeros(v.shape())).collect();
        AdamState {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    /// Applies one bias-corrected Adam update from the gradients stored in
    /// `params`, then zeroes those gradients.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} tensors, store has {}",
                self.first.len(),
                params.len()
            )));
        }
        for id in params.ids() {
            let shape = params.value(id).shape();
            if params.grad(id).shape() != shape {
                return Err(Error::MissingGradient(params.name(id).to_string()));
            }
            if self.first[id.index()].shape() != shape {
                return Err(Error::shape(
                    format!("adam moment for {}", params.name(id)),
                    shape,
                    self.first[id.index()].shape(),
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for id in params.ids() {
            let grad = params.grad(id).data().to_vec();
            let m = self.first[id.index()].data_mut();
            let v = self.second[id.index()].data_mut();
            let value = params.value_mut(id).data_mut();
            for k in 0..grad.len() {
                let g = grad[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                value[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        params.zero_grads();
        Ok(())
    }
}
