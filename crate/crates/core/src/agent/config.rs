use serde::{Deserialize, Serialize};

use crate::approx::{LossWeights, NetSpec, OptimizerConfig};
use crate::error::{ForgerError, Result};
use crate::replay::{ForgettingSchedule, ReplayConfig};

/// Every learning setting of a run. Config files must name every field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Gradient steps of imitation per subgoal.
    pub imitation_steps: usize,
    pub schedule: ForgettingSchedule,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub eps_decay: f64,
    /// Decay epsilon every environment step instead of every episode.
    pub eps_per_step: bool,
    /// Gradient steps between target syncs.
    pub tau: u64,
    pub batch_size: usize,
    /// Share of augmentation data in imitation batches.
    pub extra_fraction: f64,
    /// Environment steps per gradient update while forging.
    pub train_every: usize,
    pub loss: LossWeights,
    pub replay: ReplayConfig,
    pub optimizer: OptimizerConfig,
    pub net: NetSpec,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            imitation_steps: 150_000,
            schedule: ForgettingSchedule::linear(250.0),
            eps_initial: 0.1,
            eps_final: 0.01,
            eps_decay: 0.99,
            eps_per_step: false,
            tau: 2000,
            batch_size: 32,
            extra_fraction: 0.25,
            train_every: 1,
            loss: LossWeights::default(),
            replay: ReplayConfig::default(),
            optimizer: OptimizerConfig::default(),
            net: NetSpec::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ForgerError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.eps_initial) || !(0.0..=1.0).contains(&self.eps_final) {
            return bad(format!(
                "epsilon {} / {} outside [0, 1]",
                self.eps_initial, self.eps_final
            ));
        }
        if self.eps_final > self.eps_initial {
            return bad(format!(
                "eps_final {} exceeds eps_initial {}",
                self.eps_final, self.eps_initial
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_decay) {
            return bad(format!("eps_decay {} outside [0, 1]", self.eps_decay));
        }
        if !(0.0..1.0).contains(&self.extra_fraction) {
            return bad(format!(
                "extra_fraction {} outside [0, 1)",
                self.extra_fraction
            ));
        }
        if self.batch_size == 0 || self.train_every == 0 || self.tau == 0 {
            return bad("batch_size, train_every and tau must be positive".into());
        }
        if let NetSpec::Feedforward { hidden } = &self.net {
            if hidden.contains(&0) {
                return bad(format!("hidden sizes {hidden:?}"));
            }
        }
        self.schedule.validate()?;
        self.loss.validate()?;
        self.replay.validate()?;
        self.optimizer.validate()
    }
}
