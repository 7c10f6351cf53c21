use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state: moment vectors are all-zero iff `step_count == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, dim: usize) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update in place. SGD: `w -= lr * g`. Adam: bias-corrected moments.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64]) -> Result<()> {
        if gradient.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: gradient.len(),
            });
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: "optimizer gradient".into(),
            });
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in params.iter_mut().zip(gradient) {
                    *w -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                self.step_count += 1;
                let t = self.step_count as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for i in 0..params.len() {
                    let g = gradient[i];
                    let m = &mut self.first_moment[i];
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    let v = &mut self.second_moment[i];
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}
