//! Forgetful experience replay.
//!
//! Off-policy Q-learning from imperfect demonstrations: a goal-structured
//! prioritized replay buffer whose demo share decays over training, subtask
//! extraction from demonstration inventories, pseudo-rewards, and
//! task-specific augmentation. Two small environments with scripted,
//! corruptible experts are included for experiments.

pub mod agent;
pub mod approx;
pub mod envs;
pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod replay;
pub mod types;

pub use error::{ForgerError, Result};
pub use types::{
    compute_nstep, derive_seed, Action, Episode, EpisodeStep, Inventory, NStep, Observation,
    Source, SubgoalId, Transition,
};
