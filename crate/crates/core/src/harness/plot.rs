use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{episode_returns, load_metrics};
use crate::error::{ForgerError, Result};

const SMOOTHING: usize = 10;
const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// One legend entry: per-episode curves of every seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub runs: Vec<Vec<f64>>,
}

impl Series {
    /// Per episode: mean, min, and max over the runs that reached it.
    pub fn envelope(&self) -> Vec<(f64, f64, f64)> {
        let len = self.runs.iter().map(Vec::len).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let vals: Vec<f64> = self.runs.iter().filter_map(|r| r.get(i).copied()).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, lo, hi)
            })
            .collect()
    }
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let s = &values[(i + 1).saturating_sub(w)..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

fn is_seed_component(s: &str) -> bool {
    let digits = s.strip_prefix("seed_").or_else(|| s.strip_prefix("seed"));
    digits.is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

/// Legend label of a metrics file: the file stem with any seed suffix
/// removed; for `.../<name>/seed_<n>/metrics.csv`, `<name>`.
pub fn series_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let mut stem = stem.to_string();
    for sep in ["_seed", "-seed", ".seed"] {
        if let Some(i) = stem.rfind(sep) {
            if is_seed_component(&stem[i + 1..]) {
                stem.truncate(i);
            }
        }
    }
    if stem != "metrics" && !is_seed_component(&stem) {
        return stem;
    }
    path.ancestors()
        .skip(1)
        .filter_map(|p| p.file_name().and_then(|s| s.to_str()))
        .find(|c| !is_seed_component(c))
        .unwrap_or("run")
        .to_string()
}

/// Reads metrics files and groups them into series by label, in order of
/// first appearance.
pub fn load_series(paths: &[&Path]) -> Result<Vec<Series>> {
    if paths.is_empty() {
        return Err(ForgerError::Empty("no metrics files to plot".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut runs: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for p in paths {
        let records = load_metrics(p)?;
        let label = series_label(p);
        if !runs.contains_key(&label) {
            order.push(label.clone());
        }
        runs.entry(label)
            .or_default()
            .push(episode_returns(&records));
    }
    Ok(order
        .into_iter()
        .map(|label| {
            let runs = runs.remove(&label).unwrap_or_default();
            Series { label, runs }
        })
        .collect())
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let exp = (span / n as f64).log10().floor();
    let mag = 10f64.powf(exp);
    let mult = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .find(|m| span / (m * mag) <= n as f64)
        .unwrap_or(10.0);
    let step = mult * mag;
    // integer tick indices keep -0.3 / 0.1 from rounding past -3
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    // k * mult / 10^-exp is one correctly rounded division for small steps
    let value = |k: i64| {
        let v = if exp < 0.0 {
            k as f64 * mult / 10f64.powf(-exp)
        } else {
            k as f64 * step
        };
        if v == 0.0 {
            0.0
        } else {
            v
        }
    };
    (first..=last).map(value).collect()
}

/// Line chart of smoothed episode returns: mean curve per series, with a
/// min-max band when the series has more than one run.
pub fn render_svg(title: &str, series: &[Series]) -> Result<String> {
    let smoothed: Vec<(String, usize, Vec<(f64, f64, f64)>)> = series
        .iter()
        .map(|s| {
            let runs = s.runs.iter().map(|r| trailing_mean(r, SMOOTHING)).collect();
            let env = Series {
                label: s.label.clone(),
                runs,
            }
            .envelope();
            (s.label.clone(), s.runs.len(), env)
        })
        .collect();
    let n_max = smoothed.iter().map(|s| s.2.len()).max().unwrap_or(0);
    if n_max == 0 {
        return Err(ForgerError::Empty("metrics files hold no episodes".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, _, env) in &smoothed {
        for &(_, a, b) in env {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(ForgerError::NonFinite("episode returns".into()));
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x_span = (n_max.max(2) - 1) as f64;
    let sx = |i: f64| LEFT + pw * i / x_span;
    let sy = |v: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        esc(title)
    );
    for t in nice_ticks(lo, hi, 6) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.2}" text-anchor="end">{t}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for t in nice_ticks(0.0, x_span, 8) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">return (trailing mean of {SMOOTHING})</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (k, (label, runs, env)) in smoothed.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if *runs > 1 {
            let upper = env
                .iter()
                .enumerate()
                .map(|(i, e)| format!("{:.2},{:.2}", sx(i as f64), sy(e.2)));
            let lower = env
                .iter()
                .enumerate()
                .rev()
                .map(|(i, e)| format!("{:.2},{:.2}", sx(i as f64), sy(e.1)));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = env
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{:.2},{:.2}", sx(i as f64), sy(e.0)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{:.1}" width="14" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{} (n={runs})</text>"#,
            ly - 9.0,
            lx + 20.0,
            ly,
            esc(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads metrics files and writes the chart to `out`.
pub fn plot_files(paths: &[&Path], out: &Path, title: &str) -> Result<Vec<Series>> {
    let series = load_series(paths)?;
    let svg = render_svg(title, &series)?;
    std::fs::write(out, svg).map_err(|e| ForgerError::io(out, e))?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_from_file_names() {
        assert_eq!(
            series_label(Path::new("runs/linear_50/seed_3/metrics.csv")),
            "linear_50"
        );
        assert_eq!(series_label(Path::new("a/const_seed12.csv")), "const");
        assert_eq!(series_label(Path::new("full-forget.csv")), "full-forget");
        assert_eq!(series_label(Path::new("seed_1/metrics.csv")), "run");
    }

    #[test]
    fn trailing_window() {
        let v: Vec<f64> = (1..=12).map(f64::from).collect();
        let s = trailing_mean(&v, 10);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 1.5);
        assert_eq!(s[9], 5.5);
        assert_eq!(s[11], 7.5);
    }

    #[test]
    fn envelope_over_ragged_runs() {
        let s = Series {
            label: "x".into(),
            runs: vec![vec![1.0, 2.0, 3.0], vec![3.0, 0.0]],
        };
        assert_eq!(
            s.envelope(),
            vec![(2.0, 1.0, 3.0), (1.0, 0.0, 2.0), (3.0, 3.0, 3.0)]
        );
    }

    #[test]
    fn single_run_has_no_band() {
        let one = Series {
            label: "a".into(),
            runs: vec![vec![1.0, 2.0, 4.0]],
        };
        let svg = render_svg("t", std::slice::from_ref(&one)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 0);
        let two = Series {
            label: "b".into(),
            runs: vec![vec![0.0, 1.0], vec![2.0, 3.0]],
        };
        let svg = render_svg("t", &[one, two]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("b (n=2)"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(
            nice_ticks(0.0, 10.0, 5),
            vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
        );
        assert_eq!(
            nice_ticks(-0.3, 0.25, 6),
            vec![-0.3, -0.2, -0.1, 0.0, 0.1, 0.2]
        );
    }
}
