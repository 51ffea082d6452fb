use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Gradients, LstmParameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Adam => 1e-3,
            OptimizerKind::Sgd => 0.1,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::parse("optimizer", s, "expected adam or sgd")),
        }
    }
}

/// Update rule plus its per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    /// Adam with decay rates 0.9 / 0.999 and ε = 1e-8.
    pub fn adam(params: &LstmParameters, learning_rate: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: vec![0.0; params.len()],
            second: vec![0.0; params.len()],
            steps: 0,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn new(kind: OptimizerKind, params: &LstmParameters, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::adam(params, learning_rate),
            OptimizerKind::Sgd => Optimizer::sgd(learning_rate),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn apply_update(&mut self, params: &mut LstmParameters, grads: &Gradients) {
        assert_eq!(params.shape, grads.shape, "gradient shape mismatch");
        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.values.iter_mut().zip(&grads.values) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(
                    self.first.len(),
                    params.len(),
                    "optimizer built for another model"
                );
                let (b1, b2) = (self.beta1, self.beta2);
                let t = self.steps as i32;
                let correction1 = 1.0 - b1.powi(t);
                let correction2 = 1.0 - b2.powi(t);
                for (((p, g), m), v) in params
                    .values
                    .iter_mut()
                    .zip(&grads.values)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / correction1;
                    let v_hat = *v / correction2;
                    *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
        }
    }
}
