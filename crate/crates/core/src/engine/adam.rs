use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Gradients with a larger Euclidean norm are rescaled to this norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_grad_norm: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradient contained a non-finite value at this flat index; nothing changed.
    Skipped {
        index: usize,
    },
}

/// Adaptive-moment optimizer state over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    first: Vec<F>,
    second: Vec<F>,
    steps: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Adam {
            config,
            first: vec![F::zero(); num_params],
            second: vec![F::zero(); num_params],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [F], grads: &[F]) -> Result<StepOutcome> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::shape(
                "gradients",
                format!(
                    "optimizer tracks {} values, got {} params and {} grads",
                    self.first.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Ok(StepOutcome::Skipped { index });
        }
        self.steps += 1;
        let c = self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let t = self.steps as i32;
        let correction1 = F::one() - F::of(c.beta1.powi(t));
        let correction2 = F::one() - F::of(c.beta2.powi(t));
        let lr = F::of(c.learning_rate);
        let eps = F::of(c.epsilon);
        let scale = match c.max_grad_norm {
            Some(max) => {
                let norm = grads.iter().map(|g| g.f64() * g.f64()).sum::<f64>().sqrt();
                F::of(if norm > max { max / norm } else { 1.0 })
            }
            None => F::one(),
        };
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.first[i] = b1 * self.first[i] + (F::one() - b1) * g;
            self.second[i] = b2 * self.second[i] + (F::one() - b2) * g * g;
            let m_hat = self.first[i] / correction1;
            let v_hat = self.second[i] / correction2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(StepOutcome::Applied)
    }
}
