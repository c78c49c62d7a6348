use serde::{Deserialize, Serialize};

use crate::error::{ForgerError, Result};

/// Demo share of each forging batch as a function of the episode index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForgettingSchedule {
    /// Fixed demo ratio.
    Constant { rho: f64 },
    /// Demo share falls linearly from 1 to 0 at episode `d`. With `raw`,
    /// the rising `min(1, k/d)` curve is used as the demo share instead.
    Linear { d: f64, raw: bool },
    /// No demo data after imitation.
    FullForget,
}

impl ForgettingSchedule {
    pub fn linear(d: f64) -> Self {
        ForgettingSchedule::Linear { d, raw: false }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ForgettingSchedule::Constant { rho } if !(0.0..=1.0).contains(&rho) => Err(
                ForgerError::InvalidConfig(format!("constant demo ratio {rho} outside [0, 1]")),
            ),
            ForgettingSchedule::Linear { d, .. } if !(d > 0.0 && d.is_finite()) => Err(
                ForgerError::InvalidConfig(format!("forgetting horizon d = {d} must be positive")),
            ),
            _ => Ok(()),
        }
    }

    /// Short name usable in file paths, e.g. `linear_50`.
    pub fn label(&self) -> String {
        match *self {
            ForgettingSchedule::Constant { rho } => format!("constant_{rho}"),
            ForgettingSchedule::Linear { d, raw: false } => format!("linear_{d}"),
            ForgettingSchedule::Linear { d, raw: true } => format!("linear_raw_{d}"),
            ForgettingSchedule::FullForget => "full_forget".into(),
        }
    }

    /// Fraction of each batch drawn from demonstrations at episode `k`.
    pub fn rate(&self, k: usize) -> Result<f64> {
        self.validate()?;
        let k = k as f64;
        Ok(match *self {
            ForgettingSchedule::Constant { rho } => rho,
            ForgettingSchedule::Linear { d, raw } => {
                let forgotten = (k / d).min(1.0);
                if raw {
                    forgotten
                } else {
                    1.0 - forgotten
                }
            }
            ForgettingSchedule::FullForget => 0.0,
        })
    }
}

/// Free-function form of [`ForgettingSchedule::rate`].
pub fn forgetting_rate(schedule: &ForgettingSchedule, k: usize) -> Result<f64> {
    schedule.rate(k)
}
