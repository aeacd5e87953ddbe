//! Adam with an L2 term added to the raw gradients.

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient; `lambda * theta` joins the gradient before the moment
    /// updates.
    pub l2: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, l2: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub cfg: AdamConfig,
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: vec![F::ZERO; len],
            v: vec![F::ZERO; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over the whole flat parameter buffer. Rejects non-finite
    /// gradients before touching any state.
    pub fn step(&mut self, params: &mut [F], grads: &[F]) -> Result<()> {
        debug_assert_eq!(params.len(), grads.len());
        if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient[{pos}]")));
        }
        self.t += 1;
        let b1 = F::from_f64(self.cfg.beta1);
        let b2 = F::from_f64(self.cfg.beta2);
        let one_m_b1 = F::from_f64(1.0 - self.cfg.beta1);
        let one_m_b2 = F::from_f64(1.0 - self.cfg.beta2);
        let corr1 = F::from_f64(1.0 / (1.0 - self.cfg.beta1.powi(self.t as i32)));
        let corr2 = F::from_f64(1.0 / (1.0 - self.cfg.beta2.powi(self.t as i32)));
        let lr = F::from_f64(self.cfg.learning_rate);
        let eps = F::from_f64(self.cfg.epsilon);
        let l2 = F::from_f64(self.cfg.l2);
        for i in 0..params.len() {
            let g = grads[i] + l2 * params[i];
            self.m[i] = b1 * self.m[i] + one_m_b1 * g;
            self.v[i] = b2 * self.v[i] + one_m_b2 * g * g;
            let mhat = self.m[i] * corr1;
            let vhat = self.v[i] * corr2;
            params[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        Ok(())
    }
}
