use std::collections::BTreeMap;

use super::chain::SubtaskChain;
use crate::error::{ForgerError, Result};
use crate::types::{nstep_window, Episode, Inventory, Source, SubgoalId, Transition};

/// Picks the active option from items acquired so far this episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    chain: SubtaskChain,
}

impl Controller {
    pub fn new(chain: SubtaskChain) -> Result<Self> {
        chain.validate()?;
        Ok(Controller { chain })
    }

    pub fn chain(&self) -> &SubtaskChain {
        &self.chain
    }

    /// Index of the first subgoal whose predicate is unmet; the last index
    /// once every predicate holds.
    pub fn active_index(&self, acquired: &Inventory) -> usize {
        self.chain
            .links
            .iter()
            .position(|l| !l.is_met(acquired))
            .unwrap_or(self.chain.len() - 1)
    }

    pub fn advance(&self, acquired: &Inventory) -> &SubgoalId {
        &self.chain.links[self.active_index(acquired)].subgoal
    }

    /// Number of leading subgoals whose predicates hold.
    pub fn completed(&self, acquired: &Inventory) -> usize {
        self.chain
            .links
            .iter()
            .take_while(|l| l.is_met(acquired))
            .count()
    }
}

/// Per-subgoal imitation data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubgoalData {
    /// Steps attributed to this subgoal: margin mask 1, option reward.
    pub demo: Vec<Transition>,
    /// Steps of every other subgoal: margin mask 0, reward 0.
    pub extra: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSplit {
    /// Same order as the chain.
    pub per_subgoal: Vec<SubgoalData>,
    /// Steps taken after every subgoal was met (attributed to the last).
    pub uncovered: usize,
}

impl DemoSplit {
    pub fn get(&self, chain: &SubtaskChain, name: &str) -> Result<&SubgoalData> {
        chain
            .position(name)
            .map(|i| &self.per_subgoal[i])
            .ok_or_else(|| ForgerError::UnknownSubgoal(name.to_string()))
    }
}

/// Subgoal index for every step of `episode`.
///
/// The active subgoal comes from cumulative acquisitions before the step,
/// except that a craft step producing a later subgoal's item belongs to
/// that later subgoal.
pub fn assign_steps(
    episode: &Episode,
    controller: &Controller,
    craft_outputs: &BTreeMap<usize, String>,
) -> (Vec<usize>, usize) {
    let chain = controller.chain();
    let mut acquired = Inventory::new();
    let mut uncovered = 0;
    let gains = episode.gains();
    let mut out = Vec::with_capacity(episode.len());
    for (step, gain) in episode.steps.iter().zip(&gains) {
        let mut g = controller.active_index(&acquired);
        if controller.completed(&acquired) == chain.len() {
            uncovered += 1;
        }
        if let Some(pos) = craft_outputs
            .get(&step.action.index())
            .and_then(|item| chain.position_of_item(item))
        {
            if pos > g {
                g = pos;
            }
        }
        out.push(g);
        for (item, c) in gain.iter() {
            acquired.add(item, c);
        }
    }
    (out, uncovered)
}

/// Splits demonstrations into per-subgoal demo and augmentation sets.
///
/// Demo transitions of `g` see the option's reward and terminate when `g`
/// completes or the episode ends; extra transitions carry zero reward and
/// terminate only at episode end.
pub fn split_demos(
    demos: &[Episode],
    chain: &SubtaskChain,
    craft_outputs: &BTreeMap<usize, String>,
    n: usize,
    gamma: f64,
) -> Result<DemoSplit> {
    if demos.is_empty() {
        return Err(ForgerError::Empty("no demonstrations to split".into()));
    }
    if n == 0 {
        return Err(ForgerError::InvalidConfig(
            "n-step length must be >= 1".into(),
        ));
    }
    let controller = Controller::new(chain.clone())?;
    let mut per_subgoal = vec![SubgoalData::default(); chain.len()];
    let mut uncovered = 0;
    for ep in demos {
        ep.validate()?;
        let (assign, unc) = assign_steps(ep, &controller, craft_outputs);
        uncovered += unc;
        let gains = ep.gains();
        let env_done = ep.dones();
        let zeros = vec![0.0; ep.len()];

        // per-subgoal view of rewards and option terminations
        let mut acquired = Inventory::new();
        let mut met_before: Vec<bool> = chain.links.iter().map(|l| l.is_met(&acquired)).collect();
        let mut rewards = vec![vec![0.0; ep.len()]; chain.len()];
        let mut dones = vec![env_done.clone(); chain.len()];
        for (t, (step, gain)) in ep.steps.iter().zip(&gains).enumerate() {
            for (item, c) in gain.iter() {
                acquired.add(item, c);
            }
            for (gi, link) in chain.links.iter().enumerate() {
                rewards[gi][t] = link.reward(gain, step.reward);
                let met = link.is_met(&acquired);
                if met && !met_before[gi] {
                    dones[gi][t] = true;
                }
                met_before[gi] = met;
            }
        }

        for (t, step) in ep.steps.iter().enumerate() {
            let owner = assign[t];
            for (gi, data) in per_subgoal.iter_mut().enumerate() {
                let own = gi == owner;
                let (r, d): (&[f64], &[bool]) = if own {
                    (&rewards[gi], &dones[gi])
                } else {
                    (&zeros, &env_done)
                };
                let (n_return, n_eff, n_done) = nstep_window(r, d, t, n, gamma);
                let tr = Transition {
                    obs: step.obs.clone(),
                    action: step.action,
                    reward: r[t],
                    next_obs: ep.obs_at(t + 1).clone(),
                    done: d[t],
                    n_return,
                    n_obs: ep.obs_at(t + n_eff).clone(),
                    n_eff,
                    n_done,
                    subgoal: chain.links[gi].subgoal.name.clone(),
                    margin_mask: if own { 1.0 } else { 0.0 },
                    source: Source::Demo,
                };
                if own {
                    data.demo.push(tr);
                } else {
                    data.extra.push(tr);
                }
            }
        }
    }
    Ok(DemoSplit {
        per_subgoal,
        uncovered,
    })
}
