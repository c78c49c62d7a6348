//! Experiment plumbing: config files, demo and metrics files, seeded
//! multi-run training, greedy evaluation, presets, and SVG charts.

mod config;
mod demos;
mod metrics;
mod plot;
mod presets;
mod run;

pub use config::{ChainSource, DemoSource, ExperimentConfig};
pub use demos::{
    gen_demos, load_demos, read_demos, save_demos, write_demos, DemoHeader, DemoRecord, DemoSet,
    DEMO_FORMAT,
};
pub use metrics::{
    episode_returns, format_metrics, load_metrics, read_metrics, write_metrics, MetricsRecord,
    METRICS_HEADER,
};
pub use plot::{plot_files, render_svg, series_label, Series};
pub use presets::{
    cell_dir, craftworld_agent, craftworld_experiment, format_summary, full_chain_schedules,
    lineworld_agent, lineworld_experiment, preset, run_preset, schedule_regimes, Cell, CellResult,
    Preset, PresetName, DEFAULT_EPISODES, DEFAULT_SEEDS, MIN_SEEDS, SUMMARY_FILE,
};
pub use run::{
    eval_seed, evaluate, finish_run, format_eval, prepare, run_chain, run_demos, run_schedules,
    run_seed, seed_dir, train, write_eval, write_run, EvalReport, Prepared, SavedRun, SeedRun,
    SeedSummary, CHAIN_FILE, CHECKPOINT_FILE, ENV_FILE, EVAL_FILE, EVAL_SUBGOALS_FILE,
    METRICS_FILE, STATUS_FILE,
};
