use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, weight_decay: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction and decoupled weight decay over a fixed set
/// of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    params: Vec<ParamId>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore, params: Vec<ParamId>) -> Self {
        let m = params.iter().map(|&id| vec![0.0; store.get(id).len()]).collect::<Vec<_>>();
        let v = m.clone();
        Self { config, step: 0, params, m, v }
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    /// One update of every owned block, then zeroes their gradients:
    ///
    /// ```text
    /// p ← p − lr·wd·p
    /// p ← p − lr · m̂ / (√v̂ + ε)
    /// ```
    pub fn adam_step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig { lr, weight_decay, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, &id) in self.params.iter().enumerate() {
            let block = store.get_mut(id);
            let params = block.values.iter_mut().zip(block.grad.iter_mut());
            for ((p, g), (m, v)) in params.zip(self.m[k].iter_mut().zip(self.v[k].iter_mut())) {
                *m = beta1 * *m + (1.0 - beta1) * *g;
                *v = beta2 * *v + (1.0 - beta2) * *g * *g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * weight_decay * *p;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_no_decay_is_noop() {
        let mut store = ParamStore::new();
        let p = store.add("p", 1, 3, vec![1.0, -2.0, 0.5]);
        let cfg = AdamConfig { weight_decay: 0.0, ..Default::default() };
        let mut adam = AdamState::new(cfg, &store, vec![p]);
        for _ in 0..5 {
            adam.adam_step(&mut store);
        }
        assert_eq!(store.get(p).values, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_by_hand() {
        let mut store = ParamStore::new();
        let p = store.add("p", 1, 1, vec![1.0]);
        store.get_mut(p).grad[0] = 1.0;
        let mut adam = AdamState::new(AdamConfig::default(), &store, vec![p]);
        adam.adam_step(&mut store);
        // m̂ = 1, v̂ = 1 after bias correction
        let decayed = 1.0 - 1e-4 * 1e-4;
        let expect = decayed - 1e-4 * 1.0 / (1.0 + 1e-8);
        assert!((store.get(p).values[0] - expect).abs() < 1e-15);
        assert!((store.get(p).values[0] - (1.0 - 1e-4)).abs() < 2e-8);
        assert_eq!(store.get(p).grad[0], 0.0);
    }

    #[test]
    fn descends_quadratic_monotonically() {
        let mut store = ParamStore::new();
        let p = store.add("p", 1, 1, vec![0.5]);
        let cfg = AdamConfig { lr: 1e-2, ..Default::default() };
        let mut adam = AdamState::new(cfg, &store, vec![p]);
        let mut prev = 0.5f64;
        for _ in 0..50 {
            let x = store.get(p).values[0];
            store.get_mut(p).grad[0] = x; // d(½p²)/dp
            adam.adam_step(&mut store);
            let now = store.get(p).values[0].abs();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn only_owned_blocks_move() {
        let mut store = ParamStore::new();
        let a = store.add("a", 1, 1, vec![1.0]);
        let b = store.add("b", 1, 1, vec![1.0]);
        store.get_mut(a).grad[0] = 1.0;
        store.get_mut(b).grad[0] = 1.0;
        let mut adam = AdamState::new(AdamConfig::default(), &store, vec![a]);
        adam.adam_step(&mut store);
        assert_ne!(store.get(a).values[0], 1.0);
        assert_eq!(store.get(b).values[0], 1.0);
        assert_eq!(store.get(b).grad[0], 1.0);
    }
}
