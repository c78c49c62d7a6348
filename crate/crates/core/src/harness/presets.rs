use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{ChainSource, DemoSource, ExperimentConfig};
use super::plot::plot_files;
use super::run::{finish_run, run_schedules, seed_dir, SeedSummary, METRICS_FILE};
use crate::agent::AgentConfig;
use crate::approx::{NetSpec, OptimizerConfig};
use crate::envs::{CraftWorldConfig, EnvConfig, ExpertConfig, ExpertExecution, LineWorldConfig};
use crate::error::{ForgerError, Result};
use crate::replay::ForgettingSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetName {
    QualityAblation,
    ScheduleComparison,
    Discretization,
    Augmentation,
    FullChain,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::QualityAblation,
        PresetName::ScheduleComparison,
        PresetName::Discretization,
        PresetName::Augmentation,
        PresetName::FullChain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::QualityAblation => "quality-ablation",
            PresetName::ScheduleComparison => "schedule-comparison",
            PresetName::Discretization => "discretization",
            PresetName::Augmentation => "augmentation",
            PresetName::FullChain => "full-chain",
        }
    }
}

impl FromStr for PresetName {
    type Err = ForgerError;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                ForgerError::InvalidConfig(format!(
                    "unknown preset {s:?}; one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// One curve of a preset: a complete experiment, charted under `group`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub group: String,
    pub label: String,
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: PresetName,
    pub cells: Vec<Cell>,
}

impl Preset {
    pub fn with_seeds(mut self, seeds: &[u64]) -> Self {
        for c in &mut self.cells {
            c.experiment.seeds = seeds.to_vec();
        }
        self
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        for c in &mut self.cells {
            c.experiment.episodes = episodes;
        }
        self
    }

    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.group) {
                out.push(c.group.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            if c.experiment.seeds.len() < MIN_SEEDS {
                problems.push(format!(
                    "{}/{}: fewer than {MIN_SEEDS} seeds",
                    c.group, c.label
                ));
            }
            for p in c.experiment.problems(Path::new(".")) {
                problems.push(format!("{}/{}: {p}", c.group, c.label));
            }
            if self.cells[..i]
                .iter()
                .any(|o| o.group == c.group && o.label == c.label)
            {
                problems.push(format!("{}/{}: duplicate cell", c.group, c.label));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ForgerError::InvalidConfig(problems.join("; ")))
        }
    }
}

pub const MIN_SEEDS: usize = 4;
pub const DEFAULT_SEEDS: [u64; 4] = [0, 1, 2, 3];
pub const DEFAULT_EPISODES: usize = 300;
const DEMO_EPISODES: usize = 20;
/// CraftWorld options need more coverage than one flat LineWorld policy,
/// and forging past ~100 episodes only erodes the imitated policies.
const CRAFT_DEMO_EPISODES: usize = 60;
const CRAFT_EPISODES: usize = 100;

/// The four regimes compared in every schedule chart.
pub fn schedule_regimes() -> [ForgettingSchedule; 4] {
    [
        ForgettingSchedule::Constant { rho: 0.5 },
        ForgettingSchedule::FullForget,
        ForgettingSchedule::linear(50.0),
        ForgettingSchedule::linear(250.0),
    ]
}

/// Full-chain regimes; the constant ratio comes first because linear
/// forgetting loses most of the imitated chain at this scale.
pub fn full_chain_schedules() -> [ForgettingSchedule; 2] {
    [
        ForgettingSchedule::Constant { rho: 0.5 },
        ForgettingSchedule::linear(50.0),
    ]
}

/// Learner settings of the LineWorld presets.
pub fn lineworld_agent() -> AgentConfig {
    AgentConfig {
        imitation_steps: 20_000,
        tau: 1000,
        optimizer: OptimizerConfig::adam(1e-3),
        net: NetSpec::Feedforward {
            hidden: vec![64, 64],
        },
        ..Default::default()
    }
}

/// Learner settings of the CraftWorld presets.
pub fn craftworld_agent() -> AgentConfig {
    AgentConfig {
        imitation_steps: 20_000,
        tau: 1000,
        optimizer: OptimizerConfig::adam(1e-3),
        net: NetSpec::Feedforward {
            hidden: vec![64, 64],
        },
        ..Default::default()
    }
}

pub fn lineworld_experiment(
    bins: usize,
    corruption: f64,
    schedule: ForgettingSchedule,
) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        seeds: DEFAULT_SEEDS.to_vec(),
        episodes: DEFAULT_EPISODES,
        eval_episodes: 0,
        env: EnvConfig::LineWorld(LineWorldConfig {
            bins,
            ..Default::default()
        }),
        demos: DemoSource::Generate {
            expert: ExpertConfig::new(corruption)?,
            episodes: DEMO_EPISODES,
            execution: ExpertExecution::Continuous,
        },
        chain: ChainSource::Flat,
        agent: AgentConfig {
            schedule,
            ..lineworld_agent()
        },
    })
}

pub fn craftworld_experiment(world: CraftWorldConfig, agent: AgentConfig) -> ExperimentConfig {
    ExperimentConfig {
        seeds: DEFAULT_SEEDS.to_vec(),
        episodes: CRAFT_EPISODES,
        eval_episodes: 100,
        env: EnvConfig::CraftWorld(world),
        demos: DemoSource::Generate {
            expert: ExpertConfig::clean(),
            episodes: CRAFT_DEMO_EPISODES,
            execution: ExpertExecution::Discretized,
        },
        chain: ChainSource::Extract,
        agent,
    }
}

fn schedule_cells(group: &str, bins: usize, corruption: f64) -> Result<Vec<Cell>> {
    schedule_regimes()
        .into_iter()
        .map(|s| {
            Ok(Cell {
                group: group.into(),
                label: s.label(),
                experiment: lineworld_experiment(bins, corruption, s)?,
            })
        })
        .collect()
}

pub fn preset(name: PresetName) -> Result<Preset> {
    let cells = match name {
        PresetName::QualityAblation => {
            let mut cells = Vec::new();
            for p in [0.0, 0.2, 0.5] {
                cells.extend(schedule_cells(&format!("quality_p{p:.1}"), 7, p)?);
            }
            cells
        }
        PresetName::ScheduleComparison => schedule_cells("schedules", 7, 0.2)?,
        PresetName::Discretization => [
            ForgettingSchedule::Constant { rho: 0.1 },
            ForgettingSchedule::linear(50.0),
        ]
        .into_iter()
        .map(|s| {
            Ok(Cell {
                group: "discretization_k3".into(),
                label: s.label(),
                experiment: lineworld_experiment(3, 0.0, s)?,
            })
        })
        .collect::<Result<_>>()?,
        PresetName::Augmentation => [0.0, 0.25]
            .into_iter()
            .map(|f| Cell {
                group: "augmentation".into(),
                label: format!("extra_{f}"),
                experiment: craftworld_experiment(
                    CraftWorldConfig::three_item(),
                    AgentConfig {
                        extra_fraction: f,
                        ..craftworld_agent()
                    },
                ),
            })
            .collect(),
        PresetName::FullChain => full_chain_schedules()
            .into_iter()
            .map(|s| Cell {
                group: "full_chain".into(),
                label: s.label(),
                experiment: craftworld_experiment(
                    CraftWorldConfig::five_item(),
                    AgentConfig {
                        schedule: s,
                        ..craftworld_agent()
                    },
                ),
            })
            .collect(),
    };
    Ok(Preset { name, cells })
}

/// One seed of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub group: String,
    pub label: String,
    pub summary: SeedSummary,
}

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn cell_dir(out_dir: &Path, group: &str, label: &str) -> PathBuf {
    out_dir.join(group).join(label)
}

/// Cells of one group that differ only in their schedule share one
/// imitation pass per seed.
fn bundles(preset: &Preset) -> Vec<Vec<usize>> {
    let strip = |c: &Cell| {
        let mut e = c.experiment.clone();
        e.agent.schedule = ForgettingSchedule::FullForget;
        (c.group.clone(), e)
    };
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, c) in preset.cells.iter().enumerate() {
        let key = strip(c);
        match out.iter_mut().find(|b| strip(&preset.cells[b[0]]) == key) {
            Some(b) => b.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

/// Runs every cell and seed, writes per-seed directories under
/// `<out>/<group>/<label>/`, one chart per group, and a summary table.
pub fn run_preset(preset: &Preset, out_dir: &Path) -> Result<Vec<CellResult>> {
    preset.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| ForgerError::io(out_dir, e))?;
    let jobs: Vec<(Vec<usize>, u64)> = bundles(preset)
        .into_iter()
        .flat_map(|b| {
            let seeds = preset.cells[b[0]].experiment.seeds.clone();
            seeds.into_iter().map(move |s| (b.clone(), s))
        })
        .collect();
    let per_job: Vec<Vec<CellResult>> = jobs
        .par_iter()
        .map(|(bundle, seed)| {
            let cfg = &preset.cells[bundle[0]].experiment;
            let schedules: Vec<ForgettingSchedule> = bundle
                .iter()
                .map(|&i| preset.cells[i].experiment.agent.schedule)
                .collect();
            let runs = run_schedules(cfg, *seed, &schedules)?;
            bundle
                .iter()
                .zip(&runs)
                .map(|(&i, run)| {
                    let c = &preset.cells[i];
                    let dir = seed_dir(&cell_dir(out_dir, &c.group, &c.label), *seed);
                    Ok(CellResult {
                        group: c.group.clone(),
                        label: c.label.clone(),
                        summary: finish_run(&c.experiment, run, &dir)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut results: Vec<CellResult> = per_job.into_iter().flatten().collect();
    let order = |r: &CellResult| {
        preset
            .cells
            .iter()
            .position(|c| c.group == r.group && c.label == r.label)
            .unwrap_or(usize::MAX)
    };
    results.sort_by_key(|r| (order(r), r.summary.seed));

    for group in preset.groups() {
        let files: Vec<PathBuf> = results
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.summary.dir.join(METRICS_FILE))
            .collect();
        let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
        let title = format!("{} / {group}", preset.name.as_str());
        plot_files(&refs, &out_dir.join(format!("{group}.svg")), &title)?;
    }
    let path = out_dir.join(SUMMARY_FILE);
    std::fs::write(&path, format_summary(&results)).map_err(|e| ForgerError::io(&path, e))?;
    Ok(results)
}

pub fn format_summary(results: &[CellResult]) -> String {
    let mut out = String::from(
        "group,label,seed,episodes,final_return,eval_mean_return,eval_full_completion,error\n",
    );
    for r in results {
        let s = &r.summary;
        let (ret, full) = match &s.eval {
            Some(e) => (e.mean_return(), e.full_completion_rate()),
            None => (f64::NAN, f64::NAN),
        };
        let err = s.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        let _ = writeln!(
            out,
            "{},{},{},{},{:?},{:?},{:?},{err}",
            r.group, r.label, s.seed, s.episodes, s.final_return, ret, full
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert!("quality".parse::<PresetName>().is_err());
    }

    #[test]
    fn every_preset_validates_with_enough_seeds() {
        for p in PresetName::ALL {
            let pr = preset(p).unwrap();
            pr.validate().unwrap();
            assert!(pr
                .cells
                .iter()
                .all(|c| c.experiment.seeds.len() >= MIN_SEEDS));
        }
        assert!(preset(PresetName::FullChain)
            .unwrap()
            .with_seeds(&[1, 2])
            .validate()
            .is_err());
    }

    #[test]
    fn schedule_comparison_has_the_four_regimes() {
        let p = preset(PresetName::ScheduleComparison).unwrap();
        let labels: Vec<&str> = p.cells.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(
            labels,
            ["constant_0.5", "full_forget", "linear_50", "linear_250"]
        );
        assert_eq!(bundles(&p), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn quality_ablation_has_one_group_per_tier() {
        let p = preset(PresetName::QualityAblation).unwrap();
        assert_eq!(p.groups(), ["quality_p0.0", "quality_p0.2", "quality_p0.5"]);
        for g in p.groups() {
            assert_eq!(p.cells.iter().filter(|c| c.group == g).count(), 4);
        }
        assert_eq!(bundles(&p).len(), 3);
        let a = preset(PresetName::Augmentation).unwrap();
        assert_eq!(bundles(&a).len(), 2);
        let f = preset(PresetName::FullChain).unwrap();
        assert_eq!(bundles(&f), vec![vec![0, 1]]);
    }
}
