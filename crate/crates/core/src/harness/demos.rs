use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{rollout_expert, EnvConfig, ExpertConfig, ExpertExecution};
use crate::error::{ForgerError, Result};
use crate::types::{derive_seed, Episode, EpisodeStep, Observation};

pub const DEMO_FORMAT: &str = "forger-demos";

/// First line of a demo file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoHeader {
    pub format: String,
    pub version: u32,
    pub env: EnvConfig,
    pub expert: ExpertConfig,
    pub execution: ExpertExecution,
    pub episodes: usize,
    pub seed: u64,
}

/// One episode per line after the header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoRecord {
    pub episode_id: usize,
    pub env: String,
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    pub final_obs: Observation,
}

impl DemoRecord {
    pub fn from_episode(episode_id: usize, ep: &Episode) -> Self {
        DemoRecord {
            episode_id,
            env: ep.env_name.clone(),
            seed: ep.seed,
            steps: ep.steps.clone(),
            final_obs: ep.final_obs.clone(),
        }
    }

    pub fn into_episode(self) -> Episode {
        Episode {
            env_name: self.env,
            seed: self.seed,
            steps: self.steps,
            final_obs: self.final_obs,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSet {
    pub header: DemoHeader,
    pub episodes: Vec<Episode>,
}

impl DemoSet {
    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return f64::NAN;
        }
        self.episodes.iter().map(Episode::total_reward).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {} episodes, mean return {:.3}",
            self.episodes.len(),
            self.header.env.name(),
            self.mean_return()
        )
    }
}

/// Episode `i` of a demo set seeded `seed` starts from `derive_seed(seed, i)`.
pub fn gen_demos(
    env: &EnvConfig,
    expert: ExpertConfig,
    episodes: usize,
    seed: u64,
    execution: ExpertExecution,
) -> Result<DemoSet> {
    expert.validate()?;
    env.build()?;
    let eps = (0..episodes)
        .map(|i| rollout_expert(env, &expert, derive_seed(seed, i as u64), execution))
        .collect::<Result<Vec<_>>>()?;
    Ok(DemoSet {
        header: DemoHeader {
            format: DEMO_FORMAT.into(),
            version: 1,
            env: env.clone(),
            expert,
            execution,
            episodes,
            seed,
        },
        episodes: eps,
    })
}

fn json_err(e: serde_json::Error) -> ForgerError {
    ForgerError::Contract(format!("demo serialization: {e}"))
}

pub fn write_demos<W: Write>(mut w: W, set: &DemoSet) -> Result<()> {
    let mut out = serde_json::to_string(&set.header).map_err(json_err)?;
    out.push('\n');
    for (i, ep) in set.episodes.iter().enumerate() {
        out.push_str(&serde_json::to_string(&DemoRecord::from_episode(i, ep)).map_err(json_err)?);
        out.push('\n');
    }
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| ForgerError::io("<demo stream>", e))
}

/// Parses a demo stream. Errors carry the 1-based line number.
pub fn read_demos<R: BufRead>(r: R) -> Result<DemoSet> {
    let mut lines = r.lines().enumerate();
    let parse_err = |line: usize, msg: String| ForgerError::Parse { line, msg };
    let header_line = match lines.next() {
        Some((_, l)) => l.map_err(|e| ForgerError::io("<demo stream>", e))?,
        None => return Err(parse_err(1, "missing header line".into())),
    };
    let header: DemoHeader =
        serde_json::from_str(&header_line).map_err(|e| parse_err(1, e.to_string()))?;
    if header.format != DEMO_FORMAT || header.version != 1 {
        return Err(parse_err(
            1,
            format!(
                "unsupported demo format {} v{}",
                header.format, header.version
            ),
        ));
    }
    let mut episodes = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| ForgerError::io("<demo stream>", e))?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DemoRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        if rec.episode_id != episodes.len() {
            return Err(parse_err(
                n,
                format!(
                    "episode_id {} out of order, expected {}",
                    rec.episode_id,
                    episodes.len()
                ),
            ));
        }
        if rec.env != header.env.name() {
            return Err(parse_err(
                n,
                format!("env {} in a {} demo file", rec.env, header.env.name()),
            ));
        }
        let ep = rec.into_episode();
        ep.validate().map_err(|e| parse_err(n, e.to_string()))?;
        episodes.push(ep);
    }
    if episodes.len() != header.episodes {
        return Err(parse_err(
            header.episodes + 1,
            format!(
                "header announces {} episodes, found {}",
                header.episodes,
                episodes.len()
            ),
        ));
    }
    Ok(DemoSet { header, episodes })
}

pub fn save_demos(path: &Path, set: &DemoSet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| ForgerError::io(path, e))?;
    write_demos(std::io::BufWriter::new(file), set)
}

pub fn load_demos(path: &Path) -> Result<DemoSet> {
    let file = std::fs::File::open(path).map_err(|e| ForgerError::io(path, e))?;
    read_demos(std::io::BufReader::new(file))
}
