//! Structured forgetful replay: per-subgoal demo and agent partitions with
//! proportional prioritization, and the schedules that set each batch's
//! demo share.

mod schedule;
mod sum_tree;

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use schedule::{forgetting_rate, ForgettingSchedule};
pub use sum_tree::SumTree;

use crate::error::{ForgerError, Result};
use crate::types::{Source, SubgoalId, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub alpha: f64,
    pub eps_agent: f64,
    pub eps_demo: f64,
    pub beta0: f64,
    /// Per-subgoal agent partition size; demo partitions are unbounded.
    pub agent_capacity: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            alpha: 0.4,
            eps_agent: 1e-4,
            eps_demo: 1.0,
            beta0: 0.6,
            agent_capacity: 100_000,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.eps_agent > 0.0
            && self.eps_demo > 0.0
            && (0.0..=1.0).contains(&self.beta0)
            && self.agent_capacity > 0;
        if ok {
            Ok(())
        } else {
            Err(ForgerError::InvalidConfig(format!(
                "replay parameters {self:?}"
            )))
        }
    }

    pub fn eps(&self, source: Source) -> f64 {
        match source {
            Source::Demo => self.eps_demo,
            Source::Agent => self.eps_agent,
        }
    }

    /// Importance exponent annealed linearly from `beta0` to 1.
    pub fn beta(&self, episode: usize, total_episodes: usize) -> f64 {
        if total_episodes == 0 {
            return 1.0;
        }
        let frac = (episode as f64 / total_episodes as f64).min(1.0);
        self.beta0 + (1.0 - self.beta0) * frac
    }
}

/// Round-half-up of `rho * batch`.
pub fn demo_count(rho: f64, batch: usize) -> usize {
    ((rho * batch as f64 + 0.5).floor() as usize).min(batch)
}

/// Handle to a stored transition; stale once its slot is overwritten.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransitionId {
    pub partition: u32,
    pub source: Source,
    pub slot: u32,
    pub generation: u64,
}

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{:?}:{}@{}",
            self.partition, self.source, self.slot, self.generation
        )
    }
}

/// Prioritized storage for one (subgoal, source) partition.
#[derive(Clone, Debug)]
pub struct PriorityStore {
    source: Source,
    capacity: Option<usize>,
    alpha: f64,
    eps: f64,
    tree: SumTree,
    items: Vec<Transition>,
    generations: Vec<u64>,
    cursor: usize,
    /// Largest `|delta| + eps` seen so far; new entries start here.
    max_priority: f64,
}

impl PriorityStore {
    pub fn new(source: Source, capacity: Option<usize>, alpha: f64, eps: f64) -> Self {
        PriorityStore {
            source,
            capacity,
            alpha,
            eps,
            tree: SumTree::with_capacity(capacity.unwrap_or(1024).min(1 << 20)),
            items: Vec::new(),
            generations: Vec::new(),
            cursor: 0,
            max_priority: 1.0 + eps,
        }
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.tree.total()
    }

    pub fn mass(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.items.get(slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Priority mass for a TD error: `(|delta| + eps)^alpha`.
    pub fn mass_for(&self, td: f64) -> f64 {
        (td.abs() + self.eps).powf(self.alpha)
    }

    /// Stores with the max-priority bootstrap; evicts FIFO when full.
    /// Returns `(slot, generation)`.
    pub fn push(&mut self, t: Transition) -> (usize, u64) {
        let mass = self.max_priority.powf(self.alpha);
        let slot = match self.capacity {
            Some(cap) if self.items.len() >= cap => {
                let slot = self.cursor;
                self.cursor = (self.cursor + 1) % cap;
                self.items[slot] = t;
                self.generations[slot] += 1;
                slot
            }
            _ => {
                self.items.push(t);
                self.generations.push(0);
                self.items.len() - 1
            }
        };
        self.tree.set(slot, mass);
        (slot, self.generations[slot])
    }

    pub fn update(&mut self, slot: usize, generation: u64, td: f64) -> Result<()> {
        if self.generations.get(slot) != Some(&generation) {
            return Err(ForgerError::StaleId(format!(
                "slot {slot} generation {generation}"
            )));
        }
        if !td.is_finite() {
            return Err(ForgerError::NonFinite(format!("TD error for slot {slot}")));
        }
        let raw = td.abs() + self.eps;
        self.max_priority = self.max_priority.max(raw);
        self.tree.set(slot, raw.powf(self.alpha));
        Ok(())
    }

    /// One proportional draw: `(slot, probability)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let total = self.tree.total();
        let slot = self
            .tree
            .find(rng.gen::<f64>() * total)
            .min(self.items.len() - 1);
        (slot, self.tree.get(slot) / total)
    }

    /// Draws `n` items with importance weights `(N * P(i))^-beta`
    /// (not yet normalized).
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        n: usize,
        beta: f64,
        partition: u32,
        rng: &mut R,
        out: &mut SampleIds,
    ) {
        let len = self.items.len() as f64;
        for _ in 0..n {
            let (slot, p) = self.draw(rng);
            out.ids.push(TransitionId {
                partition,
                source: self.source,
                slot: slot as u32,
                generation: self.generations[slot],
            });
            out.weights.push((len * p).powf(-beta));
        }
    }
}

/// Sampled ids and importance weights, detached from the buffer borrow.
#[derive(Clone, Debug, Default)]
pub struct SampleIds {
    pub ids: Vec<TransitionId>,
    pub weights: Vec<f64>,
}

impl SampleIds {
    /// Scales weights so the batch maximum is 1.
    pub fn normalize(&mut self) {
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            for w in &mut self.weights {
                *w /= max;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn demo_count(&self) -> usize {
        self.ids
            .iter()
            .filter(|id| id.source == Source::Demo)
            .count()
    }
}

/// Per-subgoal demo and agent partitions.
#[derive(Clone, Debug)]
pub struct StructuredReplayBuffer {
    config: ReplayConfig,
    names: Vec<String>,
    index: HashMap<String, usize>,
    demo: Vec<PriorityStore>,
    agent: Vec<PriorityStore>,
    demo_sealed: bool,
}

impl StructuredReplayBuffer {
    pub fn new(config: ReplayConfig, subgoals: &[SubgoalId]) -> Result<Self> {
        config.validate()?;
        let mut buf = StructuredReplayBuffer {
            config,
            names: Vec::new(),
            index: HashMap::new(),
            demo: Vec::new(),
            agent: Vec::new(),
            demo_sealed: false,
        };
        for g in subgoals {
            buf.add_subgoal(&g.name);
        }
        Ok(buf)
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn add_subgoal(&mut self, name: &str) {
        if self.index.contains_key(name) {
            return;
        }
        let c = &self.config;
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.demo
            .push(PriorityStore::new(Source::Demo, None, c.alpha, c.eps_demo));
        self.agent.push(PriorityStore::new(
            Source::Agent,
            Some(c.agent_capacity),
            c.alpha,
            c.eps_agent,
        ));
    }

    pub fn partition_index(&self, subgoal: &str) -> Result<usize> {
        self.index
            .get(subgoal)
            .copied()
            .ok_or_else(|| ForgerError::UnknownSubgoal(subgoal.to_string()))
    }

    /// After this, demo partitions accept only priority updates.
    pub fn seal_demos(&mut self) {
        self.demo_sealed = true;
    }

    pub fn store(&self, subgoal: &str, source: Source) -> Result<&PriorityStore> {
        let p = self.partition_index(subgoal)?;
        Ok(match source {
            Source::Demo => &self.demo[p],
            Source::Agent => &self.agent[p],
        })
    }

    pub fn len(&self, subgoal: &str, source: Source) -> Result<usize> {
        Ok(self.store(subgoal, source)?.len())
    }

    pub fn insert(&mut self, t: Transition) -> Result<TransitionId> {
        let p = self.partition_index(&t.subgoal)?;
        let source = t.source;
        let store = match source {
            Source::Demo => {
                if self.demo_sealed {
                    return Err(ForgerError::Contract(
                        "demo partitions are sealed after imitation setup".into(),
                    ));
                }
                &mut self.demo[p]
            }
            Source::Agent => &mut self.agent[p],
        };
        let (slot, generation) = store.push(t);
        Ok(TransitionId {
            partition: p as u32,
            source,
            slot: slot as u32,
            generation,
        })
    }

    pub fn get(&self, id: &TransitionId) -> Result<&Transition> {
        let store = match id.source {
            Source::Demo => self.demo.get(id.partition as usize),
            Source::Agent => self.agent.get(id.partition as usize),
        }
        .ok_or_else(|| ForgerError::StaleId(id.to_string()))?;
        if store.generations.get(id.slot as usize) != Some(&id.generation) {
            return Err(ForgerError::StaleId(id.to_string()));
        }
        Ok(&store.items[id.slot as usize])
    }

    /// Draws `round(rho * batch)` demo and the rest agent transitions of
    /// subgoal `g`, each proportionally to stored priority mass (with
    /// replacement). While the agent partition holds fewer transitions than
    /// its share, the shortfall is drawn from demo data.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        g: &str,
        batch: usize,
        rho: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<SampleIds> {
        if batch == 0 {
            return Err(ForgerError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(ForgerError::InvalidConfig(format!(
                "demo ratio {rho} outside [0, 1]"
            )));
        }
        let p = self.partition_index(g)?;
        let (demo, agent) = (&self.demo[p], &self.agent[p]);
        let n_agent = (batch - demo_count(rho, batch)).min(agent.len());
        let n_demo = batch - n_agent;
        if n_demo > 0 && demo.is_empty() {
            return Err(ForgerError::Empty(format!("demo partition of {g}")));
        }
        let mut out = SampleIds::default();
        demo.sample_into(n_demo, beta, p as u32, rng, &mut out);
        agent.sample_into(n_agent, beta, p as u32, rng, &mut out);
        out.normalize();
        Ok(out)
    }

    /// Sets `p_i = (|delta_i| + eps_source)^alpha` for each sampled id.
    pub fn update_priorities(&mut self, ids: &[TransitionId], td_errors: &[f64]) -> Result<()> {
        if ids.len() != td_errors.len() {
            return Err(ForgerError::Dimension {
                expected: ids.len(),
                actual: td_errors.len(),
            });
        }
        for (id, &td) in ids.iter().zip(td_errors) {
            let store = match id.source {
                Source::Demo => self.demo.get_mut(id.partition as usize),
                Source::Agent => self.agent.get_mut(id.partition as usize),
            }
            .ok_or_else(|| ForgerError::StaleId(id.to_string()))?;
            store.update(id.slot as usize, id.generation, td)?;
        }
        Ok(())
    }
}
