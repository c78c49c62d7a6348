use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{argmax, Gradients, QFunction, QNet};
use crate::error::{ForgerError, Result};
use crate::types::{Observation, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the n-step TD term.
    pub lambda_n: f64,
    /// Weight of the large-margin term (also gated per sample by its mask).
    pub lambda_margin: f64,
    /// Weight of the squared-parameter penalty.
    pub lambda_l2: f64,
    /// Margin added to every non-expert action.
    pub margin: f64,
    pub gamma: f64,
    pub n: usize,
    /// Penalize biases as well as weights.
    pub l2_biases: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_n: 1.0,
            lambda_margin: 1.0,
            lambda_l2: 1e-5,
            margin: 0.4,
            gamma: 0.99,
            n: 10,
            l2_biases: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_n >= 0.0
            && self.lambda_margin >= 0.0
            && self.lambda_l2 >= 0.0
            && self.margin >= 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && self.n >= 1;
        if ok {
            Ok(())
        } else {
            Err(ForgerError::InvalidConfig(format!("loss weights {self:?}")))
        }
    }
}

/// `mask * (max_a [q(a) + l(expert, a)] - q(expert))` with `l(e, a) = margin`
/// for `a != e` and 0 otherwise.
pub fn margin_loss(q: &[f64], expert: usize, margin: f64, mask: f64) -> f64 {
    if mask == 0.0 {
        return 0.0;
    }
    let best = q
        .iter()
        .enumerate()
        .map(|(a, &v)| if a == expert { v } else { v + margin })
        .fold(f64::NEG_INFINITY, f64::max);
    mask * (best - q[expert])
}

fn margin_argmax(q: &[f64], expert: usize, margin: f64) -> usize {
    let shifted: Vec<f64> = q
        .iter()
        .enumerate()
        .map(|(a, &v)| if a == expert { v } else { v + margin })
        .collect();
    argmax(&shifted)
}

/// One-step and n-step double-Q targets for a single transition.
pub fn double_q_target(
    t: &Transition,
    online: &QNet,
    target: &QNet,
    gamma: f64,
) -> Result<(f64, f64)> {
    let (y1, yn) = double_q_targets(&[t], online, target, gamma)?;
    Ok((y1[0], yn[0]))
}

fn bootstrap(online: &Array2<f64>, target: &Array2<f64>, i: usize) -> f64 {
    let row = online.row(i);
    let a = argmax(row.as_slice().expect("row-major"));
    target[[i, a]]
}

/// Batched targets: `y1 = r + (1 - done) γ Q'(o', argmax Q(o'))` and
/// `yn = R_n + (1 - done_n) γ^{n_eff} Q'(o_n, argmax Q(o_n))`.
pub fn double_q_targets(
    batch: &[&Transition],
    online: &QNet,
    target: &QNet,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let next: Vec<&Observation> = batch.iter().map(|t| &t.next_obs).collect();
    let nth: Vec<&Observation> = batch.iter().map(|t| &t.n_obs).collect();
    let (on1, tg1) = (online.forward_batch(&next)?, target.forward_batch(&next)?);
    let (onn, tgn) = (online.forward_batch(&nth)?, target.forward_batch(&nth)?);
    let mut y1 = Vec::with_capacity(batch.len());
    let mut yn = Vec::with_capacity(batch.len());
    for (i, t) in batch.iter().enumerate() {
        let b1 = if t.done {
            0.0
        } else {
            gamma * bootstrap(&on1, &tg1, i)
        };
        y1.push(t.reward + b1);
        let bn = if t.n_done {
            0.0
        } else {
            gamma.powi(t.n_eff as i32) * bootstrap(&onn, &tgn, i)
        };
        yn.push(t.n_return + bn);
    }
    Ok((y1, yn))
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    /// Unweighted batch mean of the squared 1-step TD error.
    pub td_loss: f64,
    /// Unweighted batch mean of the masked margin loss.
    pub margin: f64,
    pub l2: f64,
    pub grads: Gradients,
    /// `|y1 - Q(o, a)|` per sample, the priority signal.
    pub td_abs: Vec<f64>,
}

/// Importance-weighted batch mean of
/// `(y1 - q)^2 + λn (yn - q)^2 + λm * mask * margin`, plus `λ2 * l2(θ)`,
/// with analytic gradients. Targets are held constant.
pub fn composite_loss_and_grads(
    batch: &[&Transition],
    q: &QFunction,
    w: &LossWeights,
    importance: &[f64],
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(ForgerError::Empty("loss batch".into()));
    }
    if importance.len() != batch.len() {
        return Err(ForgerError::Dimension {
            expected: batch.len(),
            actual: importance.len(),
        });
    }
    if importance.iter().any(|v| !v.is_finite()) {
        return Err(ForgerError::NonFinite("importance weight".into()));
    }
    let online = &q.online;
    let n_actions = online.num_actions();
    let (y1, yn) = double_q_targets(batch, online, q.target(), w.gamma)?;
    let obs: Vec<&Observation> = batch.iter().map(|t| &t.obs).collect();
    let (qv, cache) = online.forward_train(&obs)?;

    let b = batch.len() as f64;
    let mut d_out = Array2::zeros(qv.raw_dim());
    let (mut loss, mut td_sum, mut margin_sum) = (0.0, 0.0, 0.0);
    let mut td_abs = Vec::with_capacity(batch.len());
    for (i, t) in batch.iter().enumerate() {
        let a = t.action.index();
        if a >= n_actions {
            return Err(ForgerError::OutOfRange {
                index: a,
                len: n_actions,
            });
        }
        let row = qv.row(i);
        let row = row.as_slice().expect("row-major");
        let d1 = y1[i] - row[a];
        let dn = yn[i] - row[a];
        let m = margin_loss(row, a, w.margin, t.margin_mask);
        let wi = importance[i];
        loss += wi * (d1 * d1 + w.lambda_n * dn * dn + w.lambda_margin * m) / b;
        td_sum += d1 * d1;
        margin_sum += m;
        td_abs.push(d1.abs());

        let scale = wi / b;
        d_out[[i, a]] += scale * (-2.0 * d1 - 2.0 * w.lambda_n * dn);
        if t.margin_mask != 0.0 && w.lambda_margin != 0.0 {
            let coef = scale * w.lambda_margin * t.margin_mask;
            d_out[[i, margin_argmax(row, a, w.margin)]] += coef;
            d_out[[i, a]] -= coef;
        }
    }
    let l2 = online.l2(w.l2_biases);
    loss += w.lambda_l2 * l2;
    if !loss.is_finite() {
        return Err(ForgerError::NonFinite(format!(
            "composite loss (td {td_sum}, margin {margin_sum}, l2 {l2})"
        )));
    }
    let grads = online.backward(&cache, &d_out, w.lambda_l2, w.l2_biases)?;
    Ok(LossOutput {
        loss,
        td_loss: td_sum / b,
        margin: margin_sum / b,
        l2,
        grads,
        td_abs,
    })
}
