use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use forger::envs::{CraftWorldConfig, EnvConfig, ExpertConfig, ExpertExecution, LineWorldConfig};
use forger::harness::{
    evaluate, format_summary, gen_demos, load_demos, plot_files, preset, run_preset, save_demos,
    train, write_eval, ExperimentConfig, PresetName, SavedRun, SeedSummary, SUMMARY_FILE,
};
use forger::hierarchy::{extract_chain, ChainFile};
use forger::replay::ForgettingSchedule;

#[derive(Parser)]
#[command(
    name = "forger",
    about = "Q-learning from imperfect demonstrations with forgetful replay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Execution {
    Continuous,
    Discretized,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    Constant,
    Linear,
    LinearRaw,
    FullForget,
}

#[derive(Subcommand)]
enum Command {
    /// Record scripted-expert episodes to a demo file.
    GenDemos {
        /// lineworld, lineworld-k3, craftworld, craftworld-3, craftworld-5,
        /// craftworld-full, or a TOML environment file.
        #[arg(long)]
        env: String,
        /// Probability of replacing the expert's action with a random one.
        #[arg(long, default_value_t = 0.0)]
        expert_noise: f64,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How LineWorld executes the expert's continuous thrust.
        #[arg(long, value_enum, default_value = "continuous")]
        execution: Execution,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the subtask chain of a demo file.
    ExtractChain {
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a config file or a preset; one directory per seed.
    Train {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated seed list; overrides the config.
        #[arg(long, alias = "seed", value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_enum, conflicts_with = "preset")]
        schedule: Option<ScheduleKind>,
        /// Forgetting horizon of the linear schedules.
        #[arg(long)]
        d: Option<f64>,
        /// Demo ratio of the constant schedule.
        #[arg(long)]
        demo_ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a trained seed directory.
    Evaluate {
        run: PathBuf,
        /// Environment to evaluate on; defaults to the training one.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chance of a random action per step; 0 evaluates purely greedily.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Directory for the evaluation CSVs; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chart metrics files: mean curve with a min-max band per legend entry.
    Plot {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "episode return")]
        title: String,
    },
}

fn parse_env(spec: &str) -> Result<EnvConfig> {
    Ok(match spec {
        "lineworld" => EnvConfig::LineWorld(LineWorldConfig::default()),
        "lineworld-k3" => EnvConfig::LineWorld(LineWorldConfig {
            bins: 3,
            ..Default::default()
        }),
        "craftworld" => EnvConfig::CraftWorld(CraftWorldConfig::default()),
        "craftworld-3" => EnvConfig::CraftWorld(CraftWorldConfig::three_item()),
        "craftworld-5" => EnvConfig::CraftWorld(CraftWorldConfig::five_item()),
        "craftworld-full" => EnvConfig::CraftWorld(CraftWorldConfig::full_ladder()),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| {
                format!("{path:?} is neither a known environment nor a readable file")
            })?;
            let env: EnvConfig =
                toml::from_str(&text).with_context(|| format!("parsing {path}"))?;
            env.build()?;
            env
        }
    })
}

fn schedule_override(
    kind: Option<ScheduleKind>,
    d: Option<f64>,
    demo_ratio: Option<f64>,
    current: ForgettingSchedule,
) -> Result<ForgettingSchedule> {
    let s = match (kind, current) {
        (Some(ScheduleKind::Constant), _) => ForgettingSchedule::Constant {
            rho: demo_ratio.context("--schedule constant needs --demo-ratio")?,
        },
        (Some(ScheduleKind::Linear), _) => {
            ForgettingSchedule::linear(d.context("--schedule linear needs --d")?)
        }
        (Some(ScheduleKind::LinearRaw), _) => ForgettingSchedule::Linear {
            d: d.context("--schedule linear-raw needs --d")?,
            raw: true,
        },
        (Some(ScheduleKind::FullForget), _) => ForgettingSchedule::FullForget,
        (None, ForgettingSchedule::Constant { rho }) => ForgettingSchedule::Constant {
            rho: demo_ratio.unwrap_or(rho),
        },
        (None, ForgettingSchedule::Linear { d: old, raw }) => ForgettingSchedule::Linear {
            d: d.unwrap_or(old),
            raw,
        },
        (None, s) => s,
    };
    s.validate()?;
    Ok(s)
}

fn print_summaries(rows: &[SeedSummary]) {
    for s in rows {
        let eval = s.eval.as_ref().map_or(String::new(), |e| {
            format!(
                ", eval mean {:.3}, all subgoals {:.0}%",
                e.mean_return(),
                100.0 * e.full_completion_rate()
            )
        });
        match &s.error {
            None => println!(
                "seed {}: {} episodes, final-100 mean return {:.3}{eval} -> {}",
                s.seed,
                s.episodes,
                s.final_return,
                s.dir.display()
            ),
            Some(e) => println!("seed {}: failed: {e}", s.seed),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDemos {
            env,
            expert_noise,
            episodes,
            seed,
            execution,
            out,
        } => {
            let env = parse_env(&env)?;
            let execution = match execution {
                Execution::Continuous => ExpertExecution::Continuous,
                Execution::Discretized => ExpertExecution::Discretized,
            };
            let set = gen_demos(
                &env,
                ExpertConfig::new(expert_noise)?,
                episodes,
                seed,
                execution,
            )?;
            save_demos(&out, &set)?;
            println!("{} -> {}", set.summary(), out.display());
        }
        Command::ExtractChain { demos, out } => {
            let set = load_demos(&demos)?;
            let (graph, ex) = extract_chain(&set.episodes)?;
            ChainFile::from_extraction(&graph, &ex).write(&out)?;
            println!("{}", ex.chain.summary());
            let back: u32 = ex.back_edges.iter().map(|e| e.2).sum();
            println!(
                "{} vertices, {} edges, back-edge weight {back}, {} out-of-order trajectories -> {}",
                graph.vertices.len(),
                graph.edges.len(),
                ex.violations,
                out.display()
            );
        }
        Command::Train {
            config,
            preset: preset_name,
            seeds,
            episodes,
            schedule,
            d,
            demo_ratio,
            out,
        } => {
            if let Some(name) = preset_name {
                let mut p = preset(name.parse::<PresetName>()?)?;
                if let Some(s) = &seeds {
                    p = p.with_seeds(s);
                }
                if let Some(n) = episodes {
                    p = p.with_episodes(n);
                }
                if d.is_some() || demo_ratio.is_some() {
                    bail!("--d and --demo-ratio apply to config runs, not presets");
                }
                let results = run_preset(&p, &out)?;
                print!("{}", format_summary(&results));
                println!("-> {}", out.join(SUMMARY_FILE).display());
                return Ok(());
            }
            let path = config.context("--config or --preset is required")?;
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            cfg.agent.schedule = schedule_override(schedule, d, demo_ratio, cfg.agent.schedule)?;
            print_summaries(&train(&cfg, &out)?);
        }
        Command::Evaluate {
            run,
            env,
            episodes,
            seed,
            epsilon,
            out,
        } => {
            let saved = SavedRun::load(&run)?;
            let env = match env {
                Some(e) => parse_env(&e)?,
                None => saved.env.clone(),
            };
            let report = evaluate(
                &saved.net_refs(),
                &saved.chain,
                &env,
                episodes,
                seed,
                epsilon,
            )?;
            let dir = out.unwrap_or_else(|| run.clone());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_eval(&dir, &report)?;
            println!(
                "{episodes} evaluation episodes (epsilon {epsilon}): mean return {:.3}, all subgoals met in {:.0}%",
                report.mean_return(),
                100.0 * report.full_completion_rate()
            );
            for (link, c) in saved.chain.links.iter().zip(report.completion_counts()) {
                println!("  {}: {c}/{episodes}", link.subgoal.name);
            }
        }
        Command::Plot {
            metrics,
            out,
            title,
        } => {
            let refs: Vec<&Path> = metrics.iter().map(PathBuf::as_path).collect();
            let series = plot_files(&refs, &out, &title)?;
            for s in &series {
                println!("{}: {} run(s)", s.label, s.runs.len());
            }
            println!("-> {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
