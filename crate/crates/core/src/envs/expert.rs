//! Scripted experts with controllable corruption.
//!
//! The CraftWorld expert walks the recipe list in order, acquiring each
//! item until its planned cumulative total is reached. Missing tools or
//! inputs are acquired first, so random corruption never strands it.
//! The LineWorld expert is a saturated proportional-derivative controller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::craftworld::{CraftWorld, CraftWorldConfig, Tile, Via};
use super::lineworld::LineWorld;
use super::{discretize, AnyEnv, EnvConfig, Environment};
use crate::error::{ForgerError, Result};
use crate::types::{derive_seed, Action, Episode, EpisodeStep};

const ACT_UP: usize = 0;
const ACT_DOWN: usize = 1;
const ACT_LEFT: usize = 2;
const ACT_RIGHT: usize = 3;
const ACT_INTERACT: usize = 4;
const ACT_NOOP: usize = 5;

const PD_POSITION_GAIN: f64 = 2.0;
const PD_VELOCITY_GAIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityTier {
    High,
    Medium,
    Low,
}

impl QualityTier {
    pub fn corruption_prob(self) -> f64 {
        match self {
            QualityTier::High => 0.0,
            QualityTier::Medium => 0.2,
            QualityTier::Low => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertConfig {
    /// Probability of replacing the scripted action by a uniform random one.
    pub corruption_prob: f64,
}

impl ExpertConfig {
    pub fn new(corruption_prob: f64) -> Result<Self> {
        let c = ExpertConfig { corruption_prob };
        c.validate()?;
        Ok(c)
    }

    pub fn clean() -> Self {
        ExpertConfig {
            corruption_prob: 0.0,
        }
    }

    pub fn tier(tier: QualityTier) -> Self {
        ExpertConfig {
            corruption_prob: tier.corruption_prob(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.corruption_prob) {
            return Err(ForgerError::InvalidConfig(format!(
                "corruption probability {} outside [0, 1]",
                self.corruption_prob
            )));
        }
        Ok(())
    }
}

/// One entry of the expert's acquisition plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub recipe: usize,
    pub item: String,
    /// Harvest or craft actions needed.
    pub actions: u32,
    /// Cumulative amount of `item` acquired once the step is done.
    pub target_total: u32,
}

/// Minimal acquisitions to produce one unit of the final item, in recipe order.
pub fn craftworld_plan(config: &CraftWorldConfig) -> Vec<PlanStep> {
    let n = config.recipes.len();
    let mut need = vec![0u32; n];
    need[n - 1] = 1;
    let mut actions = vec![0u32; n];
    for i in (0..n).rev() {
        let r = &config.recipes[i];
        actions[i] = need[i].div_ceil(r.yields);
        for (input, &count) in &r.inputs {
            if let Some(j) = config.recipe_for(input) {
                need[j] += actions[i] * count;
            }
        }
        if let Some(tool) = &r.required_tool {
            if let Some(j) = config.recipe_for(tool) {
                need[j] = need[j].max(1);
            }
        }
    }
    (0..n)
        .filter(|&i| actions[i] > 0)
        .map(|i| PlanStep {
            recipe: i,
            item: config.recipes[i].output.clone(),
            actions: actions[i],
            target_total: actions[i] * config.recipes[i].yields,
        })
        .collect()
}

/// How demo rollouts apply the LineWorld expert's thrust.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertExecution {
    /// The raw thrust drives the environment; the stored action is its bin.
    #[default]
    Continuous,
    /// The binned thrust drives the environment.
    Discretized,
}

/// Scripted policies for both environments.
pub struct ScriptedExpert {
    pub config: ExpertConfig,
    rng: ChaCha8Rng,
}

impl ScriptedExpert {
    pub fn new(config: ExpertConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(ScriptedExpert {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn corrupt(&mut self) -> bool {
        self.rng.gen::<f64>() < self.config.corruption_prob
    }

    /// Uncorrupted PD thrust.
    pub fn lineworld_thrust(world: &LineWorld) -> f64 {
        let s = world.state();
        let target = world.config().target;
        (PD_POSITION_GAIN * (target - s.x) - PD_VELOCITY_GAIN * s.v).clamp(-1.0, 1.0)
    }

    pub fn act_lineworld(&mut self, world: &LineWorld) -> f64 {
        if self.corrupt() {
            self.rng.gen_range(-1.0..=1.0)
        } else {
            Self::lineworld_thrust(world)
        }
    }

    pub fn act_craftworld(&mut self, world: &CraftWorld) -> Action {
        if self.corrupt() {
            Action(self.rng.gen_range(0..world.num_actions()))
        } else {
            Self::craftworld_action(world)
        }
    }

    /// Uncorrupted planner action.
    pub fn craftworld_action(world: &CraftWorld) -> Action {
        let cfg = world.config();
        for step in craftworld_plan(cfg) {
            if world.cumulative().get(&step.item) < step.target_total {
                return pursue(world, step.recipe, 0);
            }
        }
        Action(ACT_NOOP)
    }
}

fn pursue(world: &CraftWorld, recipe: usize, depth: usize) -> Action {
    let cfg = world.config();
    if depth > cfg.recipes.len() {
        return Action(ACT_NOOP);
    }
    let r = &cfg.recipes[recipe];
    let inv = world.inventory();
    if let Some(tool) = &r.required_tool {
        if inv.get(tool) == 0 {
            return match cfg.recipe_for(tool) {
                Some(j) => pursue(world, j, depth + 1),
                None => Action(ACT_NOOP),
            };
        }
    }
    match r.via {
        Via::Harvest(tile) => navigate_or_harvest(world, tile),
        Via::Craft => {
            for (input, &count) in &r.inputs {
                if inv.get(input) < count {
                    return match cfg.recipe_for(input) {
                        Some(j) => pursue(world, j, depth + 1),
                        None => Action(ACT_NOOP),
                    };
                }
            }
            cfg.craft_action(recipe).unwrap_or(Action(ACT_NOOP))
        }
    }
}

fn navigate_or_harvest(world: &CraftWorld, tile: Tile) -> Action {
    let (r, c) = world.position();
    if world.tile(r, c) == tile {
        return Action(ACT_INTERACT);
    }
    match world.nearest(tile) {
        None => Action(ACT_NOOP),
        Some((tr, tc)) => Action(if tr < r {
            ACT_UP
        } else if tr > r {
            ACT_DOWN
        } else if tc < c {
            ACT_LEFT
        } else {
            ACT_RIGHT
        }),
    }
}

/// Plays one full expert episode from `seed`.
pub fn rollout_expert(
    env: &EnvConfig,
    expert: &ExpertConfig,
    seed: u64,
    execution: ExpertExecution,
) -> Result<Episode> {
    let (mut world, mut obs) = env.reset(seed)?;
    let mut policy = ScriptedExpert::new(*expert, derive_seed(seed, 0xE1))?;
    let mut steps = Vec::new();
    loop {
        let (action, raw_action, out) = match &mut world {
            AnyEnv::CraftWorld(w) => {
                let a = policy.act_craftworld(w);
                (a, None, w.step(a)?)
            }
            AnyEnv::LineWorld(w) => {
                let thrust = policy.act_lineworld(w);
                let a = discretize(thrust, w.config().bins)?;
                let out = match execution {
                    ExpertExecution::Continuous => w.step_thrust(thrust)?,
                    ExpertExecution::Discretized => w.step(a)?,
                };
                (a, Some(thrust), out)
            }
        };
        steps.push(EpisodeStep {
            obs,
            action,
            raw_action,
            reward: out.reward,
            inventory: world.inventory().clone(),
            done: out.done,
        });
        obs = out.obs;
        if out.done {
            break;
        }
    }
    Ok(Episode {
        env_name: env.name().to_string(),
        seed,
        steps,
        final_obs: obs,
    })
}
