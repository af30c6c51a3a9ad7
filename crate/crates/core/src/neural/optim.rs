use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl Optimizer {
    pub fn sgd(momentum: f64) -> Self {
        Self::Sgd { momentum }
    }

    fn tag(&self) -> u8 {
        match self {
            Self::Sgd { .. } => 1,
            Self::Adam { .. } => 2,
        }
    }
}

/// Moment buffers carried between `train` and later `fine_tune` calls.
/// SGD keeps its velocity in `first`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub(crate) kind: u8,
    pub(crate) step: u64,
    pub(crate) first: Vec<Vec<f64>>,
    pub(crate) second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients.
    pub(crate) fn apply(&mut self, opt: &Optimizer, lr: f64, params: &mut [Tensor]) {
        if self.kind != opt.tag() || self.first.len() != params.len() {
            self.kind = opt.tag();
            self.step = 0;
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = match opt {
                Optimizer::Adam { .. } => params.iter().map(|p| vec![0.0; p.len()]).collect(),
                Optimizer::Sgd { .. } => Vec::new(),
            };
        }
        self.step += 1;
        match *opt {
            Optimizer::Sgd { momentum } => {
                for (p, vel) in params.iter_mut().zip(&mut self.first) {
                    let Some(g) = p.grad().map(<[f64]>::to_vec) else { continue };
                    for ((w, v), g) in p.values_mut().iter_mut().zip(vel.iter_mut()).zip(&g) {
                        *v = momentum * *v + g;
                        *w -= lr * *v;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let Some(g) = p.grad().map(<[f64]>::to_vec) else { continue };
                    for (((w, m), v), g) in p.values_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(&g) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    }
                }
            }
        }
    }
}
