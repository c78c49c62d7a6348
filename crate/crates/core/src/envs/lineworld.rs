//! One-dimensional thrust control toward a fixed target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bin_centers, Environment, StepOutcome};
use crate::error::{ForgerError, Result};
use crate::types::{Action, Inventory, Observation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineWorldConfig {
    pub target: f64,
    pub thrust_gain: f64,
    pub success_band: f64,
    pub max_steps: usize,
    pub success_bonus: f64,
    /// Number of discrete thrust levels the agent chooses from.
    pub bins: usize,
}

impl Default for LineWorldConfig {
    fn default() -> Self {
        LineWorldConfig {
            target: 0.5,
            thrust_gain: 0.1,
            success_band: 0.05,
            max_steps: 200,
            success_bonus: 100.0,
            bins: 7,
        }
    }
}

impl LineWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ForgerError::InvalidConfig(m));
        if !(-1.0..=1.0).contains(&self.target) {
            return bad(format!("target {} outside [-1, 1]", self.target));
        }
        if self.success_band <= 0.0 || !self.success_band.is_finite() {
            return bad(format!(
                "success band {} must be positive",
                self.success_band
            ));
        }
        if self.thrust_gain <= 0.0 || !self.thrust_gain.is_finite() {
            return bad(format!("thrust gain {} must be positive", self.thrust_gain));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.bins < 2 {
            return bad(format!("bins {} < 2", self.bins));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineWorldState {
    pub x: f64,
    pub v: f64,
}

impl LineWorldState {
    /// `v' = v + gain * thrust`, `x' = clip(x + v', -1, 1)`.
    pub fn advance(self, thrust: f64, gain: f64) -> LineWorldState {
        let v = self.v + gain * thrust;
        LineWorldState {
            x: (self.x + v).clamp(-1.0, 1.0),
            v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LineWorld {
    config: LineWorldConfig,
    centers: Vec<f64>,
    state: LineWorldState,
    steps: usize,
    done: bool,
    empty: Inventory,
}

impl LineWorld {
    pub fn new(config: LineWorldConfig) -> Result<Self> {
        config.validate()?;
        Ok(LineWorld {
            centers: bin_centers(config.bins)?,
            config,
            state: LineWorldState { x: 0.0, v: 0.0 },
            steps: 0,
            done: false,
            empty: Inventory::new(),
        })
    }

    pub fn config(&self) -> &LineWorldConfig {
        &self.config
    }

    pub fn state(&self) -> LineWorldState {
        self.state
    }

    pub fn set_state(&mut self, state: LineWorldState) {
        self.state = state;
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn observe(&self) -> Observation {
        Observation(vec![self.state.x, self.state.v])
    }

    /// Steps with a raw thrust in [-1, 1].
    pub fn step_thrust(&mut self, thrust: f64) -> Result<StepOutcome> {
        if self.done {
            return Err(ForgerError::Contract(
                "step on a terminal LineWorld state".into(),
            ));
        }
        if !thrust.is_finite() || thrust.abs() > 1.0 {
            return Err(ForgerError::Contract(format!(
                "thrust {thrust} outside [-1, 1]"
            )));
        }
        self.state = self.state.advance(thrust, self.config.thrust_gain);
        self.steps += 1;
        let dist = (self.state.x - self.config.target).abs();
        let success = dist < self.config.success_band;
        let mut reward = -dist;
        if success {
            reward += self.config.success_bonus;
        }
        self.done = success || self.steps >= self.config.max_steps;
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.done,
            inventory_delta: Inventory::new(),
        })
    }
}

impl Environment for LineWorld {
    fn name(&self) -> &'static str {
        "lineworld"
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        self.config.bins
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    /// Starts at rest at a uniform position outside the success band.
    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = loop {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            if (x - self.config.target).abs() >= self.config.success_band {
                break x;
            }
        };
        self.state = LineWorldState { x, v: 0.0 };
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let thrust = *self.centers.get(action.0).ok_or(ForgerError::OutOfRange {
            index: action.0,
            len: self.centers.len(),
        })?;
        self.step_thrust(thrust)
    }

    fn inventory(&self) -> &Inventory {
        &self.empty
    }
}
