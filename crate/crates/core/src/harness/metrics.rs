use std::io::{BufRead, Write};
use std::path::Path;

use crate::agent::MetricsRow;
use crate::error::{ForgerError, Result};

pub const METRICS_HEADER: &str =
    "episode,subgoal,env_reward,pseudo_reward,td_loss,demo_fraction,epsilon,steps";

/// One parsed metrics line.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub episode: usize,
    pub subgoal: String,
    pub env_reward: f64,
    pub pseudo_reward: f64,
    pub td_loss: f64,
    pub demo_fraction: f64,
    pub epsilon: f64,
    pub steps: usize,
}

impl From<&MetricsRow> for MetricsRecord {
    fn from(r: &MetricsRow) -> Self {
        MetricsRecord {
            episode: r.episode,
            subgoal: r.subgoal.clone(),
            env_reward: r.env_reward,
            pseudo_reward: r.pseudo_reward,
            td_loss: r.td_loss,
            demo_fraction: r.demo_fraction,
            epsilon: r.epsilon,
            steps: r.steps,
        }
    }
}

/// Shortest round-trip float text; `NaN` for missing values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_metrics(rows: &[MetricsRow]) -> Result<String> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        if r.subgoal.contains([',', '\n', '"']) {
            return Err(ForgerError::Contract(format!(
                "subgoal name {:?} in CSV",
                r.subgoal
            )));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.episode,
            r.subgoal,
            num(r.env_reward),
            num(r.pseudo_reward),
            num(r.td_loss),
            num(r.demo_fraction),
            num(r.epsilon),
            r.steps
        ));
    }
    Ok(out)
}

pub fn write_metrics<W: Write>(mut w: W, rows: &[MetricsRow]) -> Result<()> {
    w.write_all(format_metrics(rows)?.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| ForgerError::io("<metrics stream>", e))
}

pub fn read_metrics<R: BufRead>(r: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = r.lines();
    let err = |line: usize, msg: String| ForgerError::Parse { line, msg };
    match lines.next() {
        Some(Ok(h)) if h == METRICS_HEADER => {}
        Some(Ok(h)) => return Err(err(1, format!("unexpected header {h:?}"))),
        Some(Err(e)) => return Err(ForgerError::io("<metrics stream>", e)),
        None => return Err(err(1, "missing header".into())),
    }
    let mut out: Vec<MetricsRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| ForgerError::io("<metrics stream>", e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(n, format!("expected 8 fields, found {}", f.len())));
        }
        let real = |s: &str| s.parse::<f64>().map_err(|e| err(n, format!("{s:?}: {e}")));
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| err(n, format!("{s:?}: {e}")))
        };
        let rec = MetricsRecord {
            episode: int(f[0])?,
            subgoal: f[1].to_string(),
            env_reward: real(f[2])?,
            pseudo_reward: real(f[3])?,
            td_loss: real(f[4])?,
            demo_fraction: real(f[5])?,
            epsilon: real(f[6])?,
            steps: int(f[7])?,
        };
        if out.last().is_some_and(|p| p.episode > rec.episode) {
            return Err(err(
                n,
                format!(
                    "episode {} after {}",
                    rec.episode,
                    out.last().unwrap().episode
                ),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(|e| ForgerError::io(path, e))?;
    read_metrics(std::io::BufReader::new(file)).map_err(|e| match e {
        ForgerError::Parse { line, msg } => ForgerError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

/// Total environment reward per episode, summed over subgoal segments.
pub fn episode_returns(records: &[MetricsRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in records {
        if r.episode >= out.len() {
            out.resize(r.episode + 1, 0.0);
        }
        out[r.episode] += r.env_reward;
    }
    out
}
