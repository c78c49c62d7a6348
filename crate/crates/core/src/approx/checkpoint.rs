//! Plain-text parameter checkpoints.
//!
//! ```text
//! FORGER-QCKPT v1
//! nets <count>
//! net <name> mlp <sizes...>
//! <one parameter per line, flat layout of `Mlp`>
//! net <name> tabular <input_dim> <num_actions> <rows>
//! <obs features...> | <action values...>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a write/read cycle
//! reproduces parameters bit for bit.

use std::io::{BufRead, Write};

use super::{key_to_obs, state_key, Mlp, QNet, TabularQ};
use crate::error::{ForgerError, Result};

pub const CHECKPOINT_MAGIC: &str = "FORGER-QCKPT v1";

fn io_err(e: std::io::Error) -> ForgerError {
    ForgerError::io("<checkpoint stream>", e)
}

pub fn write_checkpoint<W: Write>(mut w: W, nets: &[(String, &QNet)]) -> Result<()> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    out.push_str(&format!("nets {}\n", nets.len()));
    for (name, net) in nets {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ForgerError::Contract(format!("checkpoint name {name:?}")));
        }
        match net {
            QNet::Mlp(m) => {
                let sizes: Vec<String> = m.sizes().iter().map(|s| s.to_string()).collect();
                out.push_str(&format!("net {name} mlp {}\n", sizes.join(" ")));
                for p in m.params() {
                    out.push_str(&format!("{p:?}\n"));
                }
            }
            QNet::Tabular(t) => {
                out.push_str(&format!(
                    "net {name} tabular {} {} {}\n",
                    t.input_dim(),
                    t.num_actions(),
                    t.len()
                ));
                for (key, values) in t.rows() {
                    let o: Vec<String> = key_to_obs(key).iter().map(|v| format!("{v:?}")).collect();
                    let q: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
                    out.push_str(&format!("{} | {}\n", o.join(" "), q.join(" ")));
                }
            }
        }
    }
    w.write_all(out.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => l.map_err(io_err),
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ForgerError {
        ForgerError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad number {s:?}")))
    }
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Vec<(String, QNet)>> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.next()?.trim_end() != CHECKPOINT_MAGIC {
        return Err(lines.err("missing checkpoint header"));
    }
    let head = lines.next()?;
    let count: usize = match head.split_whitespace().collect::<Vec<_>>()[..] {
        ["nets", n] => lines.num(n)?,
        _ => return Err(lines.err("expected `nets <count>`")),
    };
    let mut nets = Vec::with_capacity(count);
    for _ in 0..count {
        let head = lines.next()?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() < 3 || fields[0] != "net" {
            return Err(lines.err("expected `net <name> <kind> ...`"));
        }
        let name = fields[1].to_string();
        let net = match fields[2] {
            "mlp" => {
                let sizes = fields[3..]
                    .iter()
                    .map(|s| lines.num(s))
                    .collect::<Result<Vec<usize>>>()?;
                let mut net = Mlp::zeros(&sizes).map_err(|e| lines.err(e.to_string()))?;
                for p in net.params_mut() {
                    let l = lines.next()?;
                    *p = lines.num(l.trim())?;
                }
                QNet::Mlp(net)
            }
            "tabular" if fields.len() == 6 => {
                let dim: usize = lines.num(fields[3])?;
                let actions: usize = lines.num(fields[4])?;
                let rows: usize = lines.num(fields[5])?;
                let mut t = TabularQ::new(dim, actions)?;
                for _ in 0..rows {
                    let l = lines.next()?;
                    let (o, q) = l.split_once('|').ok_or_else(|| lines.err("expected `|`"))?;
                    let o = o
                        .split_whitespace()
                        .map(|s| lines.num(s))
                        .collect::<Result<Vec<f64>>>()?;
                    let q = q
                        .split_whitespace()
                        .map(|s| lines.num(s))
                        .collect::<Result<Vec<f64>>>()?;
                    t.insert_row(state_key(&o), q)
                        .map_err(|e| lines.err(e.to_string()))?;
                }
                QNet::Tabular(t)
            }
            other => return Err(lines.err(format!("unknown net kind {other:?}"))),
        };
        nets.push((name, net));
    }
    Ok(nets)
}
