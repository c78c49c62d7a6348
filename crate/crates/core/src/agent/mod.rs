//! Imitation, forgetful forging, and the outer episode loop over an option
//! chain.

mod config;
mod pending;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::AgentConfig;
pub use pending::PendingWindow;

use crate::approx::{composite_loss_and_grads, Optimizer, QFunction, QNet};
use crate::envs::Environment;
use crate::error::{ForgerError, Result};
use crate::hierarchy::{Controller, DemoSplit, SubtaskChain};
use crate::replay::{ForgettingSchedule, PriorityStore, SampleIds, StructuredReplayBuffer};
use crate::types::{derive_seed, Inventory, Observation, Source, Transition};

/// One metrics row: a forging segment of one subgoal within an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub subgoal: String,
    pub env_reward: f64,
    /// Option reward collected in the segment.
    pub pseudo_reward: f64,
    /// Mean 1-step squared TD error over the segment's updates (NaN if none).
    pub td_loss: f64,
    pub demo_fraction: f64,
    pub epsilon: f64,
    pub steps: usize,
    /// The option's termination predicate held at the end of the segment.
    pub completed: bool,
    pub updates: usize,
    pub demo_drawn: usize,
    pub agent_drawn: usize,
    /// Demo samples drawn by each update; kept for composition checks.
    pub batch_demo_counts: Vec<usize>,
}

/// Append-only run record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    /// Total environment reward per episode.
    pub episode_returns: Vec<f64>,
    /// Chain prefix completed per episode.
    pub episode_completed: Vec<usize>,
    pub imitation_td_loss: Vec<f64>,
    pub wall_seconds: f64,
    /// Diagnostic of the error that aborted the run, if any.
    pub error: Option<String>,
}

impl RunMetrics {
    pub fn mean_final_return(&self, window: usize) -> f64 {
        let n = self.episode_returns.len();
        let tail = &self.episode_returns[n.saturating_sub(window)..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

#[derive(Clone)]
struct OptionState {
    q: QFunction,
    opt: Optimizer,
    /// Forging segments run so far; drives the schedule and epsilon.
    episodes: usize,
    epsilon: f64,
}

/// Summary of one imitation call.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationStats {
    pub steps: usize,
    pub mean_td_loss: f64,
    pub final_loss: f64,
    pub extra_drawn: usize,
}

/// Result of [`Agent::forge`].
#[derive(Clone, Debug, PartialEq)]
pub struct ForgeOutcome {
    pub row: MetricsRow,
    pub env_done: bool,
    pub obs: Observation,
}

/// Cloning forks the full learning state, random streams included.
#[derive(Clone)]
pub struct Agent {
    config: AgentConfig,
    controller: Controller,
    options: Vec<OptionState>,
    buffer: StructuredReplayBuffer,
    extra: Vec<PriorityStore>,
    sample_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    num_actions: usize,
    imitated: Vec<bool>,
}

impl Agent {
    /// Every option starts from the same initial parameters.
    pub fn new(
        config: AgentConfig,
        chain: SubtaskChain,
        obs_dim: usize,
        num_actions: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let controller = Controller::new(chain)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 10));
        let net = QNet::build(&config.net, obs_dim, num_actions, &mut init_rng)?;
        let eps0 = config.eps_initial;
        let options = controller
            .chain()
            .links
            .iter()
            .map(|_| OptionState {
                q: QFunction::new(net.clone()),
                opt: Optimizer::new(config.optimizer),
                episodes: 0,
                epsilon: eps0,
            })
            .collect();
        let subgoals = controller.chain().subgoals();
        let buffer = StructuredReplayBuffer::new(config.replay.clone(), &subgoals)?;
        let r = &config.replay;
        let extra = subgoals
            .iter()
            .map(|_| PriorityStore::new(Source::Demo, None, r.alpha, r.eps_demo))
            .collect();
        let n = subgoals.len();
        Ok(Agent {
            controller,
            options,
            buffer,
            extra,
            sample_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 11)),
            explore_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 12)),
            num_actions,
            imitated: vec![false; n],
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    /// Replaces the forgetting schedule; used to fork one imitated agent
    /// into several forging conditions.
    pub fn set_schedule(&mut self, schedule: ForgettingSchedule) -> Result<()> {
        schedule.validate()?;
        self.config.schedule = schedule;
        Ok(())
    }

    pub fn chain(&self) -> &SubtaskChain {
        self.controller.chain()
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn buffer(&self) -> &StructuredReplayBuffer {
        &self.buffer
    }

    pub fn extra_len(&self, gi: usize) -> usize {
        self.extra[gi].len()
    }

    pub fn q(&self, gi: usize) -> &QFunction {
        &self.options[gi].q
    }

    pub fn nets(&self) -> Vec<(String, &QNet)> {
        self.chain()
            .links
            .iter()
            .zip(&self.options)
            .map(|(l, o)| (l.subgoal.name.clone(), &o.q.online))
            .collect()
    }

    pub fn epsilon(&self, gi: usize) -> f64 {
        self.options[gi].epsilon
    }

    pub fn forging_episodes(&self, gi: usize) -> usize {
        self.options[gi].episodes
    }

    /// Fills demo and augmentation pools, then seals the demo partitions.
    pub fn load_demos(&mut self, split: &DemoSplit) -> Result<()> {
        if split.per_subgoal.len() != self.options.len() {
            return Err(ForgerError::Dimension {
                expected: self.options.len(),
                actual: split.per_subgoal.len(),
            });
        }
        for (gi, data) in split.per_subgoal.iter().enumerate() {
            for t in &data.demo {
                self.buffer.insert(t.clone())?;
            }
            for t in &data.extra {
                let mut t = t.clone();
                t.subgoal = self.chain().links[gi].subgoal.name.clone();
                self.extra[gi].push(t);
            }
        }
        self.buffer.seal_demos();
        Ok(())
    }

    fn train_on(
        &mut self,
        gi: usize,
        refs: &[&Transition],
        weights: &[f64],
    ) -> Result<crate::approx::LossOutput> {
        let opt = &mut self.options[gi];
        let out = composite_loss_and_grads(refs, &opt.q, &self.config.loss, weights)?;
        opt.q.step(&out.grads, &mut opt.opt, self.config.tau)?;
        if !opt.q.online.is_finite() {
            return Err(ForgerError::NonFinite(format!(
                "parameters of `{}` after update {}",
                self.controller.chain().links[gi].subgoal.name,
                opt.q.updates()
            )));
        }
        Ok(out)
    }

    /// `k` gradient steps on demo data of subgoal `gi`, mixing in
    /// augmentation data at `extra_fraction`. No environment interaction.
    pub fn imitate(&mut self, gi: usize, k: usize) -> Result<ImitationStats> {
        let name = self.chain().links[gi].subgoal.name.clone();
        let p = self.buffer.partition_index(&name)?;
        if self.buffer.store(&name, Source::Demo)?.is_empty() {
            return Err(ForgerError::Empty(format!("demo pool of `{name}`")));
        }
        let b = self.config.batch_size;
        let n_extra = if self.extra[gi].is_empty() {
            0
        } else {
            crate::replay::demo_count(self.config.extra_fraction, b)
        };
        let n_demo = b - n_extra;
        let beta = self.config.replay.beta0;
        let (mut td_sum, mut final_loss) = (0.0, f64::NAN);
        for _ in 0..k {
            let mut demo = SampleIds::default();
            self.buffer.store(&name, Source::Demo)?.sample_into(
                n_demo,
                beta,
                p as u32,
                &mut self.sample_rng,
                &mut demo,
            );
            let mut extra = SampleIds::default();
            self.extra[gi].sample_into(n_extra, beta, p as u32, &mut self.sample_rng, &mut extra);
            let max_w = demo
                .weights
                .iter()
                .chain(&extra.weights)
                .cloned()
                .fold(0.0, f64::max);
            let weights: Vec<f64> = demo
                .weights
                .iter()
                .chain(&extra.weights)
                .map(|w| w / max_w)
                .collect();
            let batch: Vec<Transition> = demo
                .ids
                .iter()
                .map(|id| self.buffer.get(id).cloned())
                .chain(extra.ids.iter().map(|id| {
                    self.extra[gi]
                        .get(id.slot as usize)
                        .cloned()
                        .ok_or_else(|| ForgerError::StaleId(id.to_string()))
                }))
                .collect::<Result<_>>()?;
            let refs: Vec<&Transition> = batch.iter().collect();
            let out = self.train_on(gi, &refs, &weights)?;
            self.buffer
                .update_priorities(&demo.ids, &out.td_abs[..demo.len()])?;
            for (id, &td) in extra.ids.iter().zip(&out.td_abs[demo.len()..]) {
                self.extra[gi].update(id.slot as usize, id.generation, td)?;
            }
            td_sum += out.td_loss;
            final_loss = out.loss;
        }
        self.imitated[gi] = true;
        Ok(ImitationStats {
            steps: k,
            mean_td_loss: if k == 0 { f64::NAN } else { td_sum / k as f64 },
            final_loss,
            extra_drawn: k * n_extra,
        })
    }

    pub fn imitate_all(&mut self) -> Result<Vec<ImitationStats>> {
        (0..self.options.len())
            .map(|gi| self.imitate(gi, self.config.imitation_steps))
            .collect()
    }

    fn act(&mut self, gi: usize, obs: &Observation) -> Result<usize> {
        let eps = self.options[gi].epsilon;
        if self.explore_rng.gen::<f64>() < eps {
            Ok(self.explore_rng.gen_range(0..self.num_actions))
        } else {
            self.options[gi].q.online.greedy(obs.as_slice())
        }
    }

    fn decay_epsilon(&mut self, gi: usize) {
        let c = &self.config;
        let o = &mut self.options[gi];
        o.epsilon = (o.epsilon * c.eps_decay).max(c.eps_final);
    }

    /// Runs option `gi` from `obs` until its predicate holds or the
    /// episode ends, learning online at the scheduled demo ratio.
    pub fn forge<E: Environment>(
        &mut self,
        env: &mut E,
        gi: usize,
        obs: Observation,
        acquired: &mut Inventory,
        episode: usize,
        beta: f64,
    ) -> Result<ForgeOutcome> {
        if !self.imitated[gi] {
            return Err(ForgerError::Contract(format!(
                "forging `{}` before imitation",
                self.chain().links[gi].subgoal.name
            )));
        }
        let link = self.chain().links[gi].clone();
        let k = self.options[gi].episodes;
        let rho = self.config.schedule.rate(k)?;
        let mut row = MetricsRow {
            episode,
            subgoal: link.subgoal.name.clone(),
            env_reward: 0.0,
            pseudo_reward: 0.0,
            td_loss: 0.0,
            demo_fraction: rho,
            epsilon: self.options[gi].epsilon,
            steps: 0,
            completed: false,
            updates: 0,
            demo_drawn: 0,
            agent_drawn: 0,
            batch_demo_counts: Vec::new(),
        };
        let mut pending = PendingWindow::new(self.config.loss.n, self.config.loss.gamma);
        // a saturated chain keeps the last option running until the episode ends
        let was_met = link.is_met(acquired);
        let mut obs = obs;
        let env_done;
        let mut td_sum = 0.0;
        loop {
            let action = self.act(gi, &obs)?;
            let out = env.step(crate::types::Action(action))?;
            for (item, c) in out.inventory_delta.iter() {
                acquired.add(item, c);
            }
            let r = link.reward(&out.inventory_delta, out.reward);
            let met = link.is_met(acquired);
            let term = out.done || (met && !was_met);
            row.env_reward += out.reward;
            row.pseudo_reward += r;
            row.steps += 1;
            let base = Transition {
                obs: obs.clone(),
                action: crate::types::Action(action),
                reward: r,
                next_obs: out.obs.clone(),
                done: term,
                n_return: 0.0,
                n_obs: out.obs.clone(),
                n_eff: 0,
                n_done: false,
                subgoal: link.subgoal.name.clone(),
                margin_mask: 0.0,
                source: Source::Agent,
            };
            for t in pending.push(base) {
                self.buffer.insert(t)?;
            }
            if self.config.eps_per_step {
                self.decay_epsilon(gi);
            }
            if row.steps.is_multiple_of(self.config.train_every) {
                match self.buffer.sample_batch(
                    &link.subgoal.name,
                    self.config.batch_size,
                    rho,
                    beta,
                    &mut self.sample_rng,
                ) {
                    Ok(ids) => {
                        let batch: Vec<Transition> = ids
                            .ids
                            .iter()
                            .map(|id| self.buffer.get(id).cloned())
                            .collect::<Result<_>>()?;
                        let refs: Vec<&Transition> = batch.iter().collect();
                        let lo = self.train_on(gi, &refs, &ids.weights)?;
                        self.buffer.update_priorities(&ids.ids, &lo.td_abs)?;
                        let d = ids.demo_count();
                        row.demo_drawn += d;
                        row.agent_drawn += ids.len() - d;
                        row.batch_demo_counts.push(d);
                        row.updates += 1;
                        td_sum += lo.td_loss;
                    }
                    Err(ForgerError::Empty(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            obs = out.obs;
            if term {
                env_done = out.done;
                row.completed = met && !was_met;
                break;
            }
        }
        for t in pending.flush() {
            self.buffer.insert(t)?;
        }
        row.td_loss = if row.updates == 0 {
            f64::NAN
        } else {
            td_sum / row.updates as f64
        };
        self.options[gi].episodes += 1;
        if !self.config.eps_per_step {
            self.decay_epsilon(gi);
        }
        Ok(ForgeOutcome { row, env_done, obs })
    }

    /// One environment episode: the controller hands control to the first
    /// unmet subgoal, which forges until it terminates.
    pub fn run_episode<E: Environment>(
        &mut self,
        env: &mut E,
        episode: usize,
        total_episodes: usize,
        env_seed: u64,
        metrics: &mut RunMetrics,
    ) -> Result<()> {
        let beta = self.config.replay.beta(episode, total_episodes);
        let mut obs = env.reset(env_seed);
        let mut acquired = Inventory::new();
        let mut ret = 0.0;
        loop {
            let gi = self.controller.active_index(&acquired);
            let out = self.forge(env, gi, obs, &mut acquired, episode, beta)?;
            ret += out.row.env_reward;
            metrics.rows.push(out.row);
            obs = out.obs;
            if out.env_done {
                break;
            }
        }
        metrics.episode_returns.push(ret);
        metrics
            .episode_completed
            .push(self.controller.completed(&acquired));
        Ok(())
    }
}

/// Seed of environment episode `episode` in a run seeded `run_seed`;
/// independent of every learning setting, so conditions are paired.
pub fn episode_seed(run_seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(run_seed, 0xE9), episode as u64)
}

/// Builds an agent, loads the demo split, and imitates every option.
pub fn imitated_agent(
    chain: &SubtaskChain,
    config: &AgentConfig,
    obs_dim: usize,
    num_actions: usize,
    split: &DemoSplit,
    seed: u64,
) -> Result<(Agent, Vec<ImitationStats>)> {
    let mut agent = Agent::new(config.clone(), chain.clone(), obs_dim, num_actions, seed)?;
    agent.load_demos(split)?;
    let stats = agent.imitate_all()?;
    Ok((agent, stats))
}

/// Forges for `episodes` episodes, appending to `metrics`. Errors are
/// recorded in `metrics.error` rather than discarding progress.
pub fn forge_episodes<E: Environment>(
    agent: &mut Agent,
    env: &mut E,
    episodes: usize,
    seed: u64,
    metrics: &mut RunMetrics,
) {
    let start = Instant::now();
    for ep in 0..episodes {
        if let Err(e) = agent.run_episode(env, ep, episodes, episode_seed(seed, ep), metrics) {
            metrics.error = Some(e.to_string());
            break;
        }
    }
    metrics.wall_seconds += start.elapsed().as_secs_f64();
}

/// Imitates every option, then forges for `episodes` episodes.
pub fn run<E: Environment>(
    chain: &SubtaskChain,
    config: &AgentConfig,
    env: &mut E,
    split: &DemoSplit,
    episodes: usize,
    seed: u64,
) -> (RunMetrics, Option<Agent>) {
    let start = Instant::now();
    let mut metrics = RunMetrics::default();
    let (mut agent, stats) =
        match imitated_agent(chain, config, env.obs_dim(), env.num_actions(), split, seed) {
            Ok(a) => a,
            Err(e) => {
                metrics.error = Some(e.to_string());
                return (metrics, None);
            }
        };
    metrics.imitation_td_loss = stats.iter().map(|s| s.mean_td_loss).collect();
    forge_episodes(&mut agent, env, episodes, seed, &mut metrics);
    metrics.wall_seconds = start.elapsed().as_secs_f64();
    (metrics, Some(agent))
}

/// Rollout of per-subgoal policies under the controller, taking a uniform
/// random action with probability `epsilon` (0 is purely greedy). Returns
/// the environment return and the acquired inventory.
pub fn eval_episode<E: Environment>(
    nets: &[&QNet],
    controller: &Controller,
    env: &mut E,
    seed: u64,
    epsilon: f64,
) -> Result<(f64, Inventory)> {
    if nets.len() != controller.chain().len() {
        return Err(ForgerError::Dimension {
            expected: controller.chain().len(),
            actual: nets.len(),
        });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(ForgerError::InvalidConfig(format!(
            "evaluation epsilon {epsilon} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xE5));
    let mut obs = env.reset(seed);
    let mut acquired = Inventory::new();
    let mut ret = 0.0;
    loop {
        let gi = controller.active_index(&acquired);
        // the draw happens every step so epsilon never shifts the stream
        let a = if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..env.num_actions())
        } else {
            nets[gi].greedy(obs.as_slice())?
        };
        let out = env.step(crate::types::Action(a))?;
        for (item, c) in out.inventory_delta.iter() {
            acquired.add(item, c);
        }
        ret += out.reward;
        obs = out.obs;
        if out.done {
            return Ok((ret, acquired));
        }
    }
}
