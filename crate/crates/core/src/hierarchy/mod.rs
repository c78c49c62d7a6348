//! Subtask structure from demonstrations: item events, the weighted
//! transition graph, its linearization into an option chain, pseudo-rewards,
//! per-subgoal demo splitting with augmentation, and the option controller.

mod chain;
mod split;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use chain::{
    build_graph, extract_chain, extract_events, graph_to_chain, pseudo_reward, ChainExtraction,
    ChainLink, ItemEvent, RewardSpec, SubtaskChain, SubtaskGraph,
};
pub use split::{assign_steps, split_demos, Controller, DemoSplit, SubgoalData};

use crate::error::{ForgerError, Result};
use crate::types::SubgoalId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub weight: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub name: String,
    pub item: String,
    pub quantity: u32,
    #[serde(default)]
    pub reward: RewardSpec,
}

/// Hand-editable chain file. Only `chain` is read back for training; the
/// graph sections are informational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    #[serde(default)]
    pub vertices: Vec<String>,
    #[serde(default)]
    pub back_edges: u32,
    #[serde(default)]
    pub violations: usize,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
    pub chain: Vec<ChainRecord>,
}

impl ChainFile {
    pub fn from_extraction(graph: &SubtaskGraph, ex: &ChainExtraction) -> Self {
        ChainFile {
            vertices: graph.vertices.iter().cloned().collect(),
            back_edges: ex.back_edges.iter().map(|e| e.2).sum(),
            violations: ex.violations,
            edges: graph
                .edges
                .iter()
                .map(|((from, to), &weight)| EdgeRecord {
                    from: from.clone(),
                    to: to.clone(),
                    weight,
                })
                .collect(),
            chain: Self::records(&ex.chain),
        }
    }

    pub fn records(chain: &SubtaskChain) -> Vec<ChainRecord> {
        chain
            .links
            .iter()
            .map(|l| ChainRecord {
                name: l.subgoal.name.clone(),
                item: l.subgoal.required_item.clone(),
                quantity: l.subgoal.required_quantity,
                reward: l.reward,
            })
            .collect()
    }

    pub fn to_chain(&self) -> Result<SubtaskChain> {
        let chain = SubtaskChain {
            links: self
                .chain
                .iter()
                .map(|r| ChainLink {
                    subgoal: SubgoalId::new(&r.name, &r.item, r.quantity),
                    reward: r.reward,
                })
                .collect(),
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| ForgerError::Contract(format!("chain serialization: {e}")))
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

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ForgerError::io(path, e))?;
        ChainFile::from_toml(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| ForgerError::io(path, e))
    }
}
