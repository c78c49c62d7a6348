use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::envs::{EnvConfig, ExpertConfig, ExpertExecution};
use crate::error::{ForgerError, Result};

/// Where a run's demonstrations come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemoSource {
    /// A demo file; relative paths resolve against the config file.
    File { path: PathBuf },
    /// Fresh expert rollouts per run, seeded from the run seed.
    Generate {
        expert: ExpertConfig,
        episodes: usize,
        execution: ExpertExecution,
    },
}

/// Where the option chain comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainSource {
    /// One option on environment reward.
    Flat,
    /// Extracted from the run's demonstrations.
    Extract,
    /// A chain file; relative paths resolve against the config file.
    File { path: PathBuf },
}

/// Everything `train` needs. Every key is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Forging episodes per run.
    pub episodes: usize,
    /// Greedy evaluation episodes after training; 0 skips evaluation.
    pub eval_episodes: usize,
    pub env: EnvConfig,
    pub demos: DemoSource,
    pub chain: ChainSource,
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    /// Every problem found, one per entry.
    pub fn problems(&self, base_dir: &Path) -> Vec<String> {
        let mut out = Vec::new();
        if self.seeds.is_empty() {
            out.push("seeds: at least one seed is required".to_string());
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            out.push(format!("seeds: duplicates in {:?}", self.seeds));
        }
        if self.episodes == 0 {
            out.push("episodes: must be positive".to_string());
        }
        if let Err(e) = self.env.build() {
            out.push(format!("env: {e}"));
        }
        if let Err(e) = self.agent.validate() {
            out.push(format!("agent: {e}"));
        }
        match &self.demos {
            DemoSource::File { path } => {
                let p = base_dir.join(path);
                if !p.is_file() {
                    out.push(format!("demos: no demo file at {}", p.display()));
                }
            }
            DemoSource::Generate {
                expert, episodes, ..
            } => {
                if let Err(e) = expert.validate() {
                    out.push(format!("demos: {e}"));
                }
                if *episodes == 0 {
                    out.push("demos: at least one demo episode is required".to_string());
                }
            }
        }
        if let ChainSource::File { path } = &self.chain {
            let p = base_dir.join(path);
            if !p.is_file() {
                out.push(format!("chain: no chain file at {}", p.display()));
            }
        }
        out
    }

    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let problems = self.problems(base_dir);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ForgerError::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ForgerError::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| ForgerError::Contract(format!("config serialization: {e}")))
    }

    /// Parses and validates; relative paths are made absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ForgerError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.validate(base)?;
        if let DemoSource::File { path } = &mut cfg.demos {
            *path = base.join(&*path);
        }
        if let ChainSource::File { path } = &mut cfg.chain {
            *path = base.join(&*path);
        }
        Ok(cfg)
    }
}
