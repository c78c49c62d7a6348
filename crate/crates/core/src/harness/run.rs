use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ChainSource, DemoSource, ExperimentConfig};
use super::demos::{gen_demos, load_demos};
use super::metrics::format_metrics;
use crate::agent::{eval_episode, forge_episodes, imitated_agent, Agent, RunMetrics};
use crate::approx::{read_checkpoint, write_checkpoint, QNet};
use crate::envs::{EnvConfig, Environment};
use crate::error::{ForgerError, Result};
use crate::hierarchy::{
    extract_chain, split_demos, ChainFile, Controller, DemoSplit, SubtaskChain,
};
use crate::replay::ForgettingSchedule;
use crate::types::{derive_seed, Episode};

/// Demonstrations of one run: the configured file, or expert rollouts
/// seeded from the run seed.
pub fn run_demos(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Episode>> {
    let set = match &cfg.demos {
        DemoSource::File { path } => load_demos(path)?,
        DemoSource::Generate {
            expert,
            episodes,
            execution,
        } => gen_demos(
            &cfg.env,
            *expert,
            *episodes,
            derive_seed(seed, 0xD0),
            *execution,
        )?,
    };
    if set.header.env != cfg.env {
        return Err(ForgerError::InvalidConfig(format!(
            "demos were recorded on a different {} configuration",
            set.header.env.name()
        )));
    }
    Ok(set.episodes)
}

pub fn run_chain(cfg: &ExperimentConfig, demos: &[Episode]) -> Result<SubtaskChain> {
    match &cfg.chain {
        ChainSource::Flat => Ok(SubtaskChain::flat(cfg.env.name())),
        ChainSource::Extract => Ok(extract_chain(demos)?.1.chain),
        ChainSource::File { path } => ChainFile::read(path)?.to_chain(),
    }
}

/// Chain and per-subgoal demo data of one run.
pub struct Prepared {
    pub chain: SubtaskChain,
    pub split: DemoSplit,
}

pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let demos = run_demos(cfg, seed)?;
    let chain = run_chain(cfg, &demos)?;
    let env = cfg.env.build()?;
    let l = &cfg.agent.loss;
    let split = split_demos(&demos, &chain, &env.craft_outputs(), l.n, l.gamma)?;
    Ok(Prepared { chain, split })
}

/// Outcome of one seeded run under one schedule.
pub struct SeedRun {
    pub seed: u64,
    pub schedule: ForgettingSchedule,
    pub chain: SubtaskChain,
    pub metrics: RunMetrics,
    pub agent: Option<Agent>,
}

/// Imitates once, then forges a copy of the imitated agent under each
/// schedule. Imitation does not read the schedule, so every copy matches a
/// run configured with that schedule from the start.
pub fn run_schedules(
    cfg: &ExperimentConfig,
    seed: u64,
    schedules: &[ForgettingSchedule],
) -> Result<Vec<SeedRun>> {
    let prep = prepare(cfg, seed)?;
    let env = cfg.env.build()?;
    let (base, stats) = imitated_agent(
        &prep.chain,
        &cfg.agent,
        env.obs_dim(),
        env.num_actions(),
        &prep.split,
        seed,
    )?;
    let imitation: Vec<f64> = stats.iter().map(|s| s.mean_td_loss).collect();
    schedules
        .iter()
        .map(|&schedule| {
            let mut agent = base.clone();
            agent.set_schedule(schedule)?;
            let mut env = cfg.env.build()?;
            let mut metrics = RunMetrics {
                imitation_td_loss: imitation.clone(),
                ..Default::default()
            };
            forge_episodes(&mut agent, &mut env, cfg.episodes, seed, &mut metrics);
            Ok(SeedRun {
                seed,
                schedule,
                chain: prep.chain.clone(),
                metrics,
                agent: Some(agent),
            })
        })
        .collect()
}

/// One run with the configured schedule; setup errors are recorded in the
/// metrics.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    match run_schedules(cfg, seed, &[cfg.agent.schedule]) {
        Ok(mut runs) => runs.remove(0),
        Err(e) => SeedRun {
            seed,
            schedule: cfg.agent.schedule,
            chain: SubtaskChain::flat(cfg.env.name()),
            metrics: RunMetrics {
                error: Some(e.to_string()),
                ..Default::default()
            },
            agent: None,
        },
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CHAIN_FILE: &str = "chain.toml";
pub const ENV_FILE: &str = "env.toml";
pub const STATUS_FILE: &str = "status.txt";
pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_SUBGOALS_FILE: &str = "eval_subgoals.csv";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| ForgerError::io(path, e))
}

pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}"))
}

/// Writes metrics, status, chain, environment, and checkpoint of a run.
pub fn write_run(dir: &Path, run: &SeedRun, env: &EnvConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ForgerError::io(dir, e))?;
    write(&dir.join(METRICS_FILE), &format_metrics(&run.metrics.rows)?)?;
    let status = match &run.metrics.error {
        None => "ok\n".to_string(),
        Some(e) => format!("error: {e}\n"),
    };
    write(&dir.join(STATUS_FILE), &status)?;
    let chain = ChainFile {
        vertices: vec![],
        back_edges: 0,
        violations: 0,
        edges: vec![],
        chain: ChainFile::records(&run.chain),
    };
    write(&dir.join(CHAIN_FILE), &chain.to_toml()?)?;
    let env_text = toml::to_string(env)
        .map_err(|e| ForgerError::Contract(format!("env serialization: {e}")))?;
    write(&dir.join(ENV_FILE), &env_text)?;
    if let Some(agent) = &run.agent {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &agent.nets())?;
        let path = dir.join(CHECKPOINT_FILE);
        std::fs::write(&path, buf).map_err(|e| ForgerError::io(&path, e))?;
    }
    Ok(())
}

/// Per-seed line of a training summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub dir: PathBuf,
    pub episodes: usize,
    pub final_return: f64,
    pub error: Option<String>,
    pub eval: Option<EvalReport>,
}

/// Writes a finished run into `dir` and evaluates it when the config asks
/// for evaluation episodes.
pub fn finish_run(cfg: &ExperimentConfig, run: &SeedRun, dir: &Path) -> Result<SeedSummary> {
    write_run(dir, run, &cfg.env)?;
    let eval = match (&run.agent, cfg.eval_episodes) {
        (Some(agent), n) if n > 0 && run.metrics.error.is_none() => {
            let nets: Vec<&QNet> = agent.nets().into_iter().map(|(_, q)| q).collect();
            let report = evaluate(
                &nets,
                &run.chain,
                &cfg.env,
                n,
                run.seed,
                cfg.agent.eps_final,
            )?;
            write_eval(dir, &report)?;
            Some(report)
        }
        _ => None,
    };
    Ok(SeedSummary {
        seed: run.seed,
        dir: dir.to_path_buf(),
        episodes: run.metrics.episode_returns.len(),
        final_return: run.metrics.mean_final_return(100),
        error: run.metrics.error.clone(),
        eval,
    })
}

/// Runs every configured seed in parallel, each into its own directory.
pub fn train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SeedSummary>> {
    cfg.validate(Path::new("."))?;
    std::fs::create_dir_all(out_dir).map_err(|e| ForgerError::io(out_dir, e))?;
    cfg.seeds
        .par_iter()
        .map(|&seed| finish_run(cfg, &run_seed(cfg, seed), &seed_dir(out_dir, seed)))
        .collect()
}

/// Greedy evaluation outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub chain: SubtaskChain,
    pub returns: Vec<f64>,
    /// `met[e][g]`: subgoal `g`'s predicate held at the end of episode `e`.
    pub met: Vec<Vec<bool>>,
}

impl EvalReport {
    /// Episodes in which each subgoal's predicate held.
    pub fn completion_counts(&self) -> Vec<usize> {
        (0..self.chain.len())
            .map(|g| self.met.iter().filter(|m| m[g]).count())
            .collect()
    }

    /// Share of episodes in which every subgoal was met.
    pub fn full_completion_rate(&self) -> f64 {
        if self.met.is_empty() {
            return 0.0;
        }
        self.met.iter().filter(|m| m.iter().all(|&b| b)).count() as f64 / self.met.len() as f64
    }

    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len().max(1) as f64
    }
}

/// Seed of evaluation episode `i`; disjoint from the training stream.
pub fn eval_seed(seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(seed, 0xEA), i as u64)
}

/// Evaluation rollouts under the chain's controller, epsilon-greedy with
/// `epsilon` (0 is purely greedy).
pub fn evaluate(
    nets: &[&QNet],
    chain: &SubtaskChain,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    epsilon: f64,
) -> Result<EvalReport> {
    let mut env = env_cfg.build()?;
    for net in nets {
        if net.input_dim() != env.obs_dim() || net.num_actions() != env.num_actions() {
            return Err(ForgerError::Contract(format!(
                "checkpoint maps {} inputs to {} actions; {} has {} and {}",
                net.input_dim(),
                net.num_actions(),
                env.name(),
                env.obs_dim(),
                env.num_actions()
            )));
        }
    }
    let controller = Controller::new(chain.clone())?;
    let mut report = EvalReport {
        chain: chain.clone(),
        returns: Vec::with_capacity(episodes),
        met: Vec::with_capacity(episodes),
    };
    for i in 0..episodes {
        let (ret, acquired) =
            eval_episode(nets, &controller, &mut env, eval_seed(seed, i), epsilon)?;
        report.returns.push(ret);
        report.met.push(
            chain
                .links
                .iter()
                .map(|l| l.subgoal_met(&acquired))
                .collect(),
        );
    }
    Ok(report)
}

pub fn format_eval(report: &EvalReport) -> (String, String) {
    let mut episodes = String::from("episode,env_reward,subgoals_met\n");
    for (i, (r, m)) in report.returns.iter().zip(&report.met).enumerate() {
        episodes.push_str(&format!("{i},{r:?},{}\n", m.iter().filter(|&&b| b).count()));
    }
    let mut subgoals = String::from("subgoal,item,quantity,episodes_met,episodes\n");
    for (link, c) in report.chain.links.iter().zip(report.completion_counts()) {
        let g = &link.subgoal;
        subgoals.push_str(&format!(
            "{},{},{},{c},{}\n",
            g.name,
            g.required_item,
            g.required_quantity,
            report.returns.len()
        ));
    }
    (episodes, subgoals)
}

pub fn write_eval(dir: &Path, report: &EvalReport) -> Result<()> {
    let (episodes, subgoals) = format_eval(report);
    write(&dir.join(EVAL_FILE), &episodes)?;
    write(&dir.join(EVAL_SUBGOALS_FILE), &subgoals)
}

/// Checkpointed networks, chain, and environment of a training directory.
pub struct SavedRun {
    pub nets: Vec<(String, QNet)>,
    pub chain: SubtaskChain,
    pub env: EnvConfig,
}

impl SavedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let ck = dir.join(CHECKPOINT_FILE);
        let file = std::fs::File::open(&ck).map_err(|e| ForgerError::io(&ck, e))?;
        let nets = read_checkpoint(std::io::BufReader::new(file))?;
        let chain = ChainFile::read(&dir.join(CHAIN_FILE))?.to_chain()?;
        let env_path = dir.join(ENV_FILE);
        let text = std::fs::read_to_string(&env_path).map_err(|e| ForgerError::io(&env_path, e))?;
        let env: EnvConfig = toml::from_str(&text).map_err(|e| ForgerError::Parse {
            line: 0,
            msg: format!("{}: {}", env_path.display(), e.message()),
        })?;
        let names: Vec<&str> = nets.iter().map(|(n, _)| n.as_str()).collect();
        let want: Vec<&str> = chain
            .links
            .iter()
            .map(|l| l.subgoal.name.as_str())
            .collect();
        if names != want {
            return Err(ForgerError::Contract(format!(
                "checkpoint nets {names:?} do not match chain {want:?}"
            )));
        }
        Ok(SavedRun { nets, chain, env })
    }

    pub fn net_refs(&self) -> Vec<&QNet> {
        self.nets.iter().map(|(_, q)| q).collect()
    }
}
