use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates for every tensor in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = |s: &ParamStore| -> Vec<Vec<f64>> {
            s.ids().map(|id| vec![0.0; s.get(id).len()]).collect()
        };
        AdamState {
            config,
            t: 0,
            m: zeros(store),
            v: zeros(store),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &f64> {
        self.v.iter().flatten()
    }

    /// One bias-corrected Adam update over every parameter in the store.
    /// Every trainable tensor must carry a gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(Error::invalid(
                "adam_step",
                format!("state tracks {} tensors, store has {}", self.m.len(), store.len()),
            ));
        }
        for id in store.ids() {
            let t = store.get(id);
            if t.requires_grad() && t.grad().is_none() {
                return Err(Error::MissingGradient(store.name(id).to_string()));
            }
            if t.len() != self.m[id.index()].len() {
                return Err(Error::invalid(
                    "adam_step",
                    format!("shape of `{}` changed", store.name(id)),
                ));
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

        for (k, tensor) in store.tensors_mut().iter_mut().enumerate() {
            if !tensor.requires_grad() {
                continue;
            }
            let grad = tensor.grad().expect("checked above").to_vec();
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in tensor.values_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[test]
    fn zero_gradient_is_identity() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.5, -2.0, 0.25]));
        let mut adam = AdamState::new(AdamConfig::default(), &store);
        for k in 1..=5 {
            store.zero_grad();
            adam.step(&mut store).unwrap();
            assert_eq!(adam.step_count(), k);
        }
        assert_eq!(store.get(w).values(), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.0, 0.0]));
        store.get_mut(w).accumulate_grad(&[3.7, -0.02]);
        let mut adam = AdamState::new(AdamConfig::default(), &store);
        adam.step(&mut store).unwrap();
        let v = store.get(w).values();
        assert!((v[0] + 1e-3).abs() < 1e-9);
        assert!((v[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn missing_gradient_errors() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![1.0]));
        let mut adam = AdamState::new(AdamConfig::default(), &store);
        assert!(matches!(adam.step(&mut store), Err(Error::MissingGradient(n)) if n == "w"));
        assert_eq!(adam.step_count(), 0);
    }
}
