//! Desk-scale environments, scripted experts and the action discretizer.

mod craftworld;
mod discretize;
mod expert;
mod lineworld;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use craftworld::{CraftWorld, CraftWorldConfig, Recipe, Tile, Via, BASE_ACTIONS};
pub use discretize::{bin_centers, discretize};
pub use expert::{
    craftworld_plan, rollout_expert, ExpertConfig, ExpertExecution, PlanStep, QualityTier,
    ScriptedExpert,
};
pub use lineworld::{LineWorld, LineWorldConfig, LineWorldState};

use crate::error::Result;
use crate::types::{Action, Inventory, Observation};

/// What one environment step reports.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// Items gained this step.
    pub inventory_delta: Inventory,
}

/// Discrete-action episodic environment with a flat observation vector.
pub trait Environment {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn max_steps(&self) -> usize;
    /// Starts a new episode; identical seeds give identical episodes.
    fn reset(&mut self, seed: u64) -> Observation;
    /// Fails with a contract error once the episode is terminal.
    fn step(&mut self, action: Action) -> Result<StepOutcome>;
    fn inventory(&self) -> &Inventory;
    /// Craft action index to the item it produces.
    fn craft_outputs(&self) -> BTreeMap<usize, String> {
        BTreeMap::new()
    }
}

/// Environment selection as it appears in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvConfig {
    CraftWorld(CraftWorldConfig),
    LineWorld(LineWorldConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::CraftWorld(_) => "craftworld",
            EnvConfig::LineWorld(_) => "lineworld",
        }
    }

    pub fn build(&self) -> Result<AnyEnv> {
        Ok(match self {
            EnvConfig::CraftWorld(c) => AnyEnv::CraftWorld(CraftWorld::new(c.clone())?),
            EnvConfig::LineWorld(c) => AnyEnv::LineWorld(LineWorld::new(c.clone())?),
        })
    }

    /// Builds the environment and resets it with `seed`.
    pub fn reset(&self, seed: u64) -> Result<(AnyEnv, Observation)> {
        let mut env = self.build()?;
        let obs = env.reset(seed);
        Ok((env, obs))
    }
}

/// Either environment behind one type.
#[derive(Clone, Debug)]
pub enum AnyEnv {
    CraftWorld(CraftWorld),
    LineWorld(LineWorld),
}

impl Environment for AnyEnv {
    fn name(&self) -> &'static str {
        match self {
            AnyEnv::CraftWorld(e) => e.name(),
            AnyEnv::LineWorld(e) => e.name(),
        }
    }

    fn obs_dim(&self) -> usize {
        match self {
            AnyEnv::CraftWorld(e) => e.obs_dim(),
            AnyEnv::LineWorld(e) => e.obs_dim(),
        }
    }

    fn num_actions(&self) -> usize {
        match self {
            AnyEnv::CraftWorld(e) => e.num_actions(),
            AnyEnv::LineWorld(e) => e.num_actions(),
        }
    }

    fn max_steps(&self) -> usize {
        match self {
            AnyEnv::CraftWorld(e) => e.max_steps(),
            AnyEnv::LineWorld(e) => e.max_steps(),
        }
    }

    fn reset(&mut self, seed: u64) -> Observation {
        match self {
            AnyEnv::CraftWorld(e) => e.reset(seed),
            AnyEnv::LineWorld(e) => e.reset(seed),
        }
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        match self {
            AnyEnv::CraftWorld(e) => e.step(action),
            AnyEnv::LineWorld(e) => e.step(action),
        }
    }

    fn inventory(&self) -> &Inventory {
        match self {
            AnyEnv::CraftWorld(e) => e.inventory(),
            AnyEnv::LineWorld(e) => e.inventory(),
        }
    }

    fn craft_outputs(&self) -> BTreeMap<usize, String> {
        match self {
            AnyEnv::CraftWorld(e) => e.craft_outputs(),
            AnyEnv::LineWorld(e) => e.craft_outputs(),
        }
    }
}
