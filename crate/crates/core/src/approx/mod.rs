//! Q-function approximators, the composite imitation/TD loss, optimizers,
//! and parameter checkpoints.

mod checkpoint;
mod loss;
mod mlp;
mod optim;
mod tabular;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{
    composite_loss_and_grads, double_q_target, double_q_targets, margin_loss, LossOutput,
    LossWeights,
};
pub use mlp::{Mlp, MlpCache};
pub use optim::{Optimizer, OptimizerConfig};
pub use tabular::{key_to_obs, state_key, StateKey, TabularQ};

use crate::error::{ForgerError, Result};
use crate::types::Observation;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Network shape requested by configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetSpec {
    Tabular,
    Feedforward { hidden: Vec<usize> },
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec::Feedforward {
            hidden: vec![64, 64],
        }
    }
}

/// One set of action-value parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum QNet {
    Tabular(TabularQ),
    Mlp(Mlp),
}

/// Parameter gradient matching a [`QNet`] variant.
#[derive(Clone, Debug, PartialEq)]
pub enum Gradients {
    Dense(Vec<f64>),
    Sparse(BTreeMap<StateKey, Vec<f64>>),
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        match self {
            Gradients::Dense(g) => g.iter().all(|v| v.is_finite()),
            Gradients::Sparse(m) => m.values().flatten().all(|v| v.is_finite()),
        }
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = match self {
            Gradients::Dense(g) => g.iter().map(|v| v * v).sum(),
            Gradients::Sparse(m) => m.values().flatten().map(|v| v * v).sum(),
        };
        sq.sqrt()
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub enum TrainCache {
    Mlp(MlpCache),
    Tabular(Vec<StateKey>),
}

fn stack(obs: &[&Observation], dim: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(obs.len() * dim);
    for o in obs {
        if o.len() != dim {
            return Err(ForgerError::Dimension {
                expected: dim,
                actual: o.len(),
            });
        }
        flat.extend_from_slice(o.as_slice());
    }
    Ok(Array2::from_shape_vec((obs.len(), dim), flat).expect("stacked shape"))
}

impl QNet {
    pub fn build<R: Rng + ?Sized>(
        spec: &NetSpec,
        input_dim: usize,
        num_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match spec {
            NetSpec::Tabular => QNet::Tabular(TabularQ::new(input_dim, num_actions)?),
            NetSpec::Feedforward { hidden } => {
                let mut sizes = vec![input_dim];
                sizes.extend_from_slice(hidden);
                sizes.push(num_actions);
                QNet::Mlp(Mlp::he_init(&sizes, rng)?)
            }
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            QNet::Tabular(t) => t.input_dim(),
            QNet::Mlp(m) => m.input_dim(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            QNet::Tabular(t) => t.num_actions(),
            QNet::Mlp(m) => m.output_dim(),
        }
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            QNet::Tabular(t) => t.forward_one(obs),
            QNet::Mlp(m) => m.forward_one(obs),
        }
    }

    /// Greedy action with lowest-index tie-breaking.
    pub fn greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(obs)?))
    }

    /// Row `i` holds the action values of `obs[i]`.
    pub fn forward_batch(&self, obs: &[&Observation]) -> Result<Array2<f64>> {
        match self {
            QNet::Tabular(t) => {
                let mut out = Array2::zeros((obs.len(), t.num_actions()));
                for (i, o) in obs.iter().enumerate() {
                    let row = t.forward_one(o.as_slice())?;
                    out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
                }
                Ok(out)
            }
            QNet::Mlp(m) => m.forward(stack(obs, m.input_dim())?.view()),
        }
    }

    pub fn forward_train(&self, obs: &[&Observation]) -> Result<(Array2<f64>, TrainCache)> {
        match self {
            QNet::Tabular(t) => {
                let keys = obs
                    .iter()
                    .map(|o| {
                        t.check(o.as_slice())?;
                        Ok(state_key(o.as_slice()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((self.forward_batch(obs)?, TrainCache::Tabular(keys)))
            }
            QNet::Mlp(m) => {
                let x = stack(obs, m.input_dim())?;
                let (out, cache) = m.forward_cached(x.view())?;
                Ok((out, TrainCache::Mlp(cache)))
            }
        }
    }

    /// Gradient of `sum(d_out * Q)` plus `l2_coef * l2` with respect to
    /// the parameters.
    pub fn backward(
        &self,
        cache: &TrainCache,
        d_out: &Array2<f64>,
        l2_coef: f64,
        l2_biases: bool,
    ) -> Result<Gradients> {
        match (self, cache) {
            (QNet::Mlp(m), TrainCache::Mlp(c)) => {
                let mut g = m.backward(c, d_out);
                m.add_l2_grad(l2_coef, l2_biases, &mut g);
                Ok(Gradients::Dense(g))
            }
            (QNet::Tabular(t), TrainCache::Tabular(keys)) => {
                let mut g: BTreeMap<StateKey, Vec<f64>> = BTreeMap::new();
                for (i, k) in keys.iter().enumerate() {
                    let row = g
                        .entry(k.clone())
                        .or_insert_with(|| vec![0.0; t.num_actions()]);
                    for (a, r) in row.iter_mut().enumerate() {
                        *r += d_out[[i, a]];
                    }
                }
                if l2_coef != 0.0 {
                    for (k, values) in t.rows() {
                        let row = g
                            .entry(k.clone())
                            .or_insert_with(|| vec![0.0; t.num_actions()]);
                        for (r, v) in row.iter_mut().zip(values) {
                            *r += 2.0 * l2_coef * v;
                        }
                    }
                }
                Ok(Gradients::Sparse(g))
            }
            _ => Err(ForgerError::Contract(
                "cache does not match network kind".into(),
            )),
        }
    }

    /// Squared-parameter penalty; table entries all count as weights.
    pub fn l2(&self, include_biases: bool) -> f64 {
        match self {
            QNet::Tabular(t) => t.l2(),
            QNet::Mlp(m) => m.l2(include_biases),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            QNet::Tabular(t) => t.rows().all(|(_, r)| r.iter().all(|v| v.is_finite())),
            QNet::Mlp(m) => m.params().iter().all(|v| v.is_finite()),
        }
    }
}

/// Online parameters θ and a lagged copy θ′ used for bootstrapping.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction {
    pub online: QNet,
    target: QNet,
    updates: u64,
}

impl QFunction {
    pub fn new(net: QNet) -> Self {
        QFunction {
            target: net.clone(),
            online: net,
            updates: 0,
        }
    }

    pub fn target(&self) -> &QNet {
        &self.target
    }

    /// Gradient steps applied to the online parameters.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Applies one optimizer step and syncs the target every `tau` steps.
    pub fn step(&mut self, grads: &Gradients, opt: &mut Optimizer, tau: u64) -> Result<()> {
        opt.apply(&mut self.online, grads)?;
        self.updates += 1;
        if tau > 0 && self.updates.is_multiple_of(tau) {
            self.sync_target();
        }
        Ok(())
    }
}
