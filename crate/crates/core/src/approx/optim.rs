use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tabular::StateKey;
use super::{Gradients, QNet};
use crate::error::{ForgerError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(1e-4)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
            OptimizerConfig::Sgd { lr } => lr > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ForgerError::InvalidConfig(format!("optimizer {self:?}")))
        }
    }
}

/// Optimizer with first and second moment estimates shaped like the
/// parameters (dense for networks, per visited row for tables).
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    rows: BTreeMap<StateKey, (Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
            rows: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, net: &mut QNet, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(ForgerError::NonFinite(format!(
                "gradient at optimizer step {}",
                self.step
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let cfg = self.config;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| match cfg {
            OptimizerConfig::Sgd { lr } => {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        };
        match (net, grads) {
            (QNet::Mlp(net), Gradients::Dense(g)) => {
                let p = net.params_mut();
                if g.len() != p.len() {
                    return Err(ForgerError::Dimension {
                        expected: p.len(),
                        actual: g.len(),
                    });
                }
                if self.m.len() != p.len() {
                    self.m = vec![0.0; p.len()];
                    self.v = vec![0.0; p.len()];
                }
                update(p, g, &mut self.m, &mut self.v);
            }
            (QNet::Tabular(table), Gradients::Sparse(g)) => {
                let n = table.num_actions();
                for (key, grow) in g {
                    if grow.len() != n {
                        return Err(ForgerError::Dimension {
                            expected: n,
                            actual: grow.len(),
                        });
                    }
                    let (m, v) = self
                        .rows
                        .entry(key.clone())
                        .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
                    update(table.row_mut(key), grow, m, v);
                }
            }
            _ => {
                return Err(ForgerError::Contract(
                    "gradient kind does not match network kind".into(),
                ))
            }
        }
        Ok(())
    }
}
