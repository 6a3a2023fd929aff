use serde::{Deserialize, Serialize};

/// First-order update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adam,
    Rmsprop,
    /// Plain gradient step, projected by the caller.
    Pgd,
}

impl Method {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "adam" => Some(Self::Adam),
            "rms" | "rmsprop" => Some(Self::Rmsprop),
            "pgd" | "sgd" => Some(Self::Pgd),
            _ => None,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMS_DECAY: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;

/// Optimizer state for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    method: Method,
    lr: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl OptimizerState {
    pub fn new(method: Method, lr: f64, n_params: usize) -> Self {
        Self {
            method,
            lr,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    /// Applies one descent step in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.first.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "gradient shape mismatch");
        self.t += 1;
        match self.method {
            Method::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = ADAM_BETA1 * self.first[i] + (1.0 - ADAM_BETA1) * g;
                    self.second[i] = ADAM_BETA2 * self.second[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = self.first[i] / bc1;
                    let v_hat = self.second[i] / bc2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPSILON);
                }
            }
            Method::Rmsprop => {
                for i in 0..params.len() {
                    let g = grads[i];
                    self.second[i] = RMS_DECAY * self.second[i] + (1.0 - RMS_DECAY) * g * g;
                    params[i] -= self.lr * g / (self.second[i].sqrt() + EPSILON);
                }
            }
            Method::Pgd => {
                for i in 0..params.len() {
                    params[i] -= self.lr * grads[i];
                }
            }
        }
    }
}
