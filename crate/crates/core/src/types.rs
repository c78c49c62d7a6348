//! Domain types shared by every module, and n-step return computation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ForgerError, Result};

/// Flat feature vector produced by an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn new(features: Vec<f64>) -> Self {
        Observation(features)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Checks the declared dimension and finiteness.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.0.len() != dim {
            return Err(ForgerError::Dimension {
                expected: dim,
                actual: self.0.len(),
            });
        }
        if !self.is_finite() {
            return Err(ForgerError::NonFinite("observation".into()));
        }
        Ok(())
    }
}

/// Discrete action index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(pub usize);

impl Action {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Where a stored transition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Demo,
    Agent,
}

/// A subgoal: obtain `required_quantity` units of `required_item`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubgoalId {
    pub name: String,
    pub required_item: String,
    pub required_quantity: u32,
}

impl SubgoalId {
    pub fn new(name: impl Into<String>, item: impl Into<String>, quantity: u32) -> Self {
        SubgoalId {
            name: name.into(),
            required_item: item.into(),
            required_quantity: quantity,
        }
    }

    /// Subgoal named after its item, the form produced by chain extraction.
    pub fn for_item(item: impl Into<String>, quantity: u32) -> Self {
        let item = item.into();
        SubgoalId::new(item.clone(), item, quantity)
    }
}

/// Item name to count.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Inventory(pub BTreeMap<String, u32>);

impl Inventory {
    pub fn new() -> Self {
        Inventory::default()
    }

    pub fn get(&self, item: &str) -> u32 {
        self.0.get(item).copied().unwrap_or(0)
    }

    pub fn add(&mut self, item: &str, count: u32) {
        if count > 0 {
            *self.0.entry(item.to_string()).or_insert(0) += count;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(|&c| c == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Positive per-item increases from `before` to `self`.
    pub fn gains_since(&self, before: &Inventory) -> Inventory {
        let mut out = Inventory::new();
        for (item, count) in self.iter() {
            let prev = before.get(item);
            if count > prev {
                out.add(item, count - prev);
            }
        }
        out
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Inventory {
    fn from_iter<T: IntoIterator<Item = (S, u32)>>(iter: T) -> Self {
        let mut inv = Inventory::new();
        for (k, v) in iter {
            inv.add(&k.into(), v);
        }
        inv
    }
}

/// One recorded step: the observation before acting, the action, and
/// what followed. `inventory` is the snapshot after the step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub obs: Observation,
    pub action: Action,
    /// Continuous action before discretization, when the actor was continuous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_action: Option<f64>,
    pub reward: f64,
    pub inventory: Inventory,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub env_name: String,
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    /// Observation reached after the last step.
    pub final_obs: Observation,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observation at time `t`; `t == len()` gives the final observation.
    pub fn obs_at(&self, t: usize) -> &Observation {
        if t < self.steps.len() {
            &self.steps[t].obs
        } else {
            &self.final_obs
        }
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.done).collect()
    }

    /// Items gained at each step (empty map when nothing was gained).
    pub fn gains(&self) -> Vec<Inventory> {
        let mut prev = Inventory::new();
        self.steps
            .iter()
            .map(|s| {
                let g = s.inventory.gains_since(&prev);
                prev = s.inventory.clone();
                g
            })
            .collect()
    }

    pub fn final_inventory(&self) -> Inventory {
        self.steps
            .last()
            .map(|s| s.inventory.clone())
            .unwrap_or_default()
    }

    /// Exactly one terminal step, at the end.
    pub fn validate(&self) -> Result<()> {
        let n = self.steps.len();
        if n == 0 {
            return Err(ForgerError::Contract("episode has no steps".into()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.done != (i + 1 == n) {
                return Err(ForgerError::Contract(format!(
                    "episode terminal flag at step {i} of {n}"
                )));
            }
        }
        Ok(())
    }
}

/// One replay element.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
    pub n_return: f64,
    pub n_obs: Observation,
    pub n_eff: usize,
    /// The n-step window ended on a terminal step, so no bootstrap.
    pub n_done: bool,
    /// Name of the subgoal this transition belongs to.
    pub subgoal: String,
    pub margin_mask: f64,
    pub source: Source,
}

/// Result of an n-step lookahead.
#[derive(Clone, Debug, PartialEq)]
pub struct NStep {
    pub n_return: f64,
    pub n_obs: Observation,
    pub n_eff: usize,
    pub terminal: bool,
}

/// Discounted sum over `rewards[t..t+n_eff]`, stopping after the first
/// terminal flag. Running out of data without a terminal flag leaves the
/// window bootstrappable. Returns `(n_return, n_eff, hit_terminal)`.
pub(crate) fn nstep_window(
    rewards: &[f64],
    dones: &[bool],
    t: usize,
    n: usize,
    gamma: f64,
) -> (f64, usize, bool) {
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut k = 0;
    while k < n && t + k < rewards.len() {
        ret += discount * rewards[t + k];
        discount *= gamma;
        k += 1;
        if dones[t + k - 1] {
            return (ret, k, true);
        }
    }
    (ret, k, false)
}

/// n-step discounted return starting at step `t`.
pub fn compute_nstep(episode: &Episode, t: usize, n: usize, gamma: f64) -> Result<NStep> {
    if t >= episode.len() {
        return Err(ForgerError::OutOfRange {
            index: t,
            len: episode.len(),
        });
    }
    if n == 0 {
        return Err(ForgerError::InvalidConfig(
            "n-step length must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ForgerError::InvalidConfig(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    let (n_return, n_eff, terminal) =
        nstep_window(&episode.rewards(), &episode.dones(), t, n, gamma);
    Ok(NStep {
        n_return,
        n_obs: episode.obs_at(t + n_eff).clone(),
        n_eff,
        terminal,
    })
}

/// Deterministic seed derivation (splitmix64 over `base` and `stream`).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
