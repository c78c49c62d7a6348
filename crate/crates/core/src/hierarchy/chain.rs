use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ForgerError, Result};
use crate::types::{Episode, Inventory, SubgoalId};

/// A maximal run of acquisitions of one item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemEvent {
    pub item: String,
    pub quantity: u32,
    /// Step at which the run started.
    pub step: usize,
    pub trajectory: usize,
}

/// Merges consecutive acquisitions of the same item. Steps gaining nothing
/// do not break a run; a step gaining several items emits them in name order.
pub fn extract_events(episode: &Episode, trajectory: usize) -> Vec<ItemEvent> {
    let mut events: Vec<ItemEvent> = Vec::new();
    for (step, gains) in episode.gains().iter().enumerate() {
        for (item, count) in gains.iter() {
            match events.last_mut() {
                Some(last) if last.item == item => last.quantity += count,
                _ => events.push(ItemEvent {
                    item: item.to_string(),
                    quantity: count,
                    step,
                    trajectory,
                }),
            }
        }
    }
    events
}

/// Items as vertices; edge weight counts adjacent event pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskGraph {
    pub vertices: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u32>,
}

impl SubtaskGraph {
    pub fn weight(&self, from: &str, to: &str) -> u32 {
        self.edges
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }
}

pub fn build_graph(sequences: &[Vec<ItemEvent>]) -> Result<SubtaskGraph> {
    if sequences.is_empty() {
        return Err(ForgerError::Empty(
            "no trajectories for subtask graph".into(),
        ));
    }
    let mut g = SubtaskGraph::default();
    for seq in sequences {
        for e in seq {
            g.vertices.insert(e.item.clone());
        }
        for pair in seq.windows(2) {
            if pair[0].item != pair[1].item {
                *g.edges
                    .entry((pair[0].item.clone(), pair[1].item.clone()))
                    .or_insert(0) += 1;
            }
        }
    }
    Ok(g)
}

/// How an option's training reward is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSpec {
    /// +1 per unit of the subgoal's item; environment reward discarded.
    #[default]
    Pseudo,
    /// Pseudo-reward plus environment reward.
    Additive,
    /// Environment reward only; the subgoal never terminates on its own.
    Environment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub subgoal: SubgoalId,
    #[serde(default)]
    pub reward: RewardSpec,
}

impl ChainLink {
    /// Termination predicate over items acquired so far this episode.
    pub fn is_met(&self, acquired: &Inventory) -> bool {
        self.reward != RewardSpec::Environment
            && acquired.get(&self.subgoal.required_item) >= self.subgoal.required_quantity
    }

    /// The subgoal's item quantity was reached, whatever the reward spec.
    pub fn subgoal_met(&self, acquired: &Inventory) -> bool {
        let g = &self.subgoal;
        !g.required_item.is_empty() && acquired.get(&g.required_item) >= g.required_quantity
    }

    pub fn reward(&self, delta: &Inventory, env_reward: f64) -> f64 {
        match self.reward {
            RewardSpec::Pseudo => pseudo_reward(delta, &self.subgoal),
            RewardSpec::Additive => pseudo_reward(delta, &self.subgoal) + env_reward,
            RewardSpec::Environment => env_reward,
        }
    }
}

/// Ordered options; the controller runs them front to back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskChain {
    pub links: Vec<ChainLink>,
}

impl SubtaskChain {
    pub fn new(subgoals: Vec<SubgoalId>, reward: RewardSpec) -> Result<Self> {
        let chain = SubtaskChain {
            links: subgoals
                .into_iter()
                .map(|subgoal| ChainLink { subgoal, reward })
                .collect(),
        };
        chain.validate()?;
        Ok(chain)
    }

    /// One option trained on environment reward: plain, non-hierarchical
    /// learning.
    pub fn flat(name: &str) -> Self {
        SubtaskChain {
            links: vec![ChainLink {
                subgoal: SubgoalId::new(name, "", 0),
                reward: RewardSpec::Environment,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(ForgerError::InvalidConfig("subtask chain is empty".into()));
        }
        let mut names = BTreeSet::new();
        for l in &self.links {
            if !names.insert(&l.subgoal.name) {
                return Err(ForgerError::InvalidConfig(format!(
                    "duplicate subgoal `{}`",
                    l.subgoal.name
                )));
            }
            if l.reward != RewardSpec::Environment && l.subgoal.required_quantity == 0 {
                return Err(ForgerError::InvalidConfig(format!(
                    "subgoal `{}` needs a positive quantity",
                    l.subgoal.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn subgoals(&self) -> Vec<SubgoalId> {
        self.links.iter().map(|l| l.subgoal.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.subgoal.name == name)
    }

    pub fn position_of_item(&self, item: &str) -> Option<usize> {
        self.links
            .iter()
            .position(|l| l.subgoal.required_item == item)
    }

    /// `log(3), planks(12), ...`
    pub fn summary(&self) -> String {
        self.links
            .iter()
            .map(|l| {
                format!(
                    "{}({})",
                    l.subgoal.required_item, l.subgoal.required_quantity
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// +1 per unit of the subgoal's item in `delta`.
pub fn pseudo_reward(delta: &Inventory, subgoal: &SubgoalId) -> f64 {
    if subgoal.required_item.is_empty() {
        return 0.0;
    }
    delta.get(&subgoal.required_item) as f64
}

/// Linearization result with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainExtraction {
    pub chain: SubtaskChain,
    /// Edges pointing backwards along the chain, with weights.
    pub back_edges: Vec<(String, String, u32)>,
    /// Trajectories whose events do not walk the chain in order.
    pub violations: usize,
}

fn median_ceil(values: &mut [u32]) -> u32 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]).div_ceil(2)
    }
}

/// Orders items by mean first-occurrence step (ties by name) and sets each
/// quantity to the rounded-up median per-trajectory total.
pub fn graph_to_chain(
    graph: &SubtaskGraph,
    sequences: &[Vec<ItemEvent>],
) -> Result<ChainExtraction> {
    if graph.vertices.is_empty() {
        return Err(ForgerError::Empty("subtask graph has no vertices".into()));
    }
    let mut first: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut totals: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for seq in sequences {
        let mut seen: BTreeMap<&str, u32> = BTreeMap::new();
        for e in seq {
            if !seen.contains_key(e.item.as_str()) {
                first.entry(&e.item).or_default().push(e.step);
            }
            *seen.entry(&e.item).or_insert(0) += e.quantity;
        }
        for (item, total) in seen {
            totals.entry(item).or_default().push(total);
        }
    }
    let mut order: Vec<(f64, &str)> = graph
        .vertices
        .iter()
        .map(|v| {
            let steps = first.get(v.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let mean = if steps.is_empty() {
                f64::INFINITY
            } else {
                steps.iter().sum::<usize>() as f64 / steps.len() as f64
            };
            (mean, v.as_str())
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let subgoals = order
        .iter()
        .map(|&(_, item)| {
            let q = totals.get_mut(item).map(|t| median_ceil(t)).unwrap_or(1);
            SubgoalId::for_item(item, q.max(1))
        })
        .collect();
    let chain = SubtaskChain::new(subgoals, RewardSpec::Pseudo)?;

    let rank: BTreeMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(i, &(_, v))| (v, i))
        .collect();
    let back_edges = graph
        .edges
        .iter()
        .filter(|((a, b), _)| rank[a.as_str()] > rank[b.as_str()])
        .map(|((a, b), &w)| (a.clone(), b.clone(), w))
        .collect();
    let violations = sequences
        .iter()
        .filter(|seq| {
            seq.windows(2)
                .any(|p| rank[p[0].item.as_str()] > rank[p[1].item.as_str()])
        })
        .count();
    Ok(ChainExtraction {
        chain,
        back_edges,
        violations,
    })
}

/// Events, graph, and chain for a demo set in one call.
pub fn extract_chain(demos: &[Episode]) -> Result<(SubtaskGraph, ChainExtraction)> {
    let seqs: Vec<Vec<ItemEvent>> = demos
        .iter()
        .enumerate()
        .map(|(i, ep)| extract_events(ep, i))
        .collect();
    let graph = build_graph(&seqs)?;
    let extraction = graph_to_chain(&graph, &seqs)?;
    Ok((graph, extraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Action, EpisodeStep, Observation};

    /// Episode whose per-step gains are the given items (one unit each, or
    /// nothing for "").
    pub(crate) fn episode_from_gains(gains: &[&str]) -> Episode {
        let mut inv = Inventory::new();
        let steps = gains
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if !g.is_empty() {
                    inv.add(g, 1);
                }
                EpisodeStep {
                    obs: Observation(vec![i as f64]),
                    action: Action(0),
                    raw_action: None,
                    reward: 0.0,
                    inventory: inv.clone(),
                    done: i + 1 == gains.len(),
                }
            })
            .collect();
        Episode {
            env_name: "test".into(),
            seed: 0,
            steps,
            final_obs: Observation(vec![gains.len() as f64]),
        }
    }

    fn items(events: &[ItemEvent]) -> Vec<(String, u32)> {
        events
            .iter()
            .map(|e| (e.item.clone(), e.quantity))
            .collect()
    }

    #[test]
    fn merges_maximal_runs() {
        let ep = episode_from_gains(&["log", "log", "log", "planks", "planks"]);
        assert_eq!(
            items(&extract_events(&ep, 0)),
            vec![("log".into(), 3), ("planks".into(), 2)]
        );
        let ep = episode_from_gains(&["log", "planks", "log"]);
        assert_eq!(extract_events(&ep, 0).len(), 3);
        let ep = episode_from_gains(&["", "", ""]);
        assert!(extract_events(&ep, 0).is_empty());
    }

    #[test]
    fn idle_steps_do_not_split_runs() {
        let ep = episode_from_gains(&["log", "", "log"]);
        let ev = extract_events(&ep, 4);
        assert_eq!(items(&ev), vec![("log".into(), 2)]);
        assert_eq!((ev[0].step, ev[0].trajectory), (0, 4));
    }

    #[test]
    fn graph_counts_adjacency() {
        let a = extract_events(&episode_from_gains(&["log", "planks"]), 0);
        let b = extract_events(&episode_from_gains(&["log", "planks"]), 1);
        let g = build_graph(&[a, b]).unwrap();
        assert_eq!(g.weight("log", "planks"), 2);
        let c = extract_events(&episode_from_gains(&["a", "b", "a"]), 0);
        let g = build_graph(&[c]).unwrap();
        assert_eq!((g.weight("a", "b"), g.weight("b", "a")), (1, 1));
        let d = extract_events(&episode_from_gains(&["a"]), 0);
        let g = build_graph(&[d]).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(g.edges.is_empty());
        assert!(build_graph(&[]).is_err());
    }

    #[test]
    fn cycle_resolved_by_first_occurrence() {
        let s1 = extract_events(&episode_from_gains(&["a", "b", "a"]), 0);
        let s2 = extract_events(&episode_from_gains(&["a", "b"]), 1);
        let g = build_graph(&[s1.clone(), s2.clone()]).unwrap();
        let ex = graph_to_chain(&g, &[s1, s2]).unwrap();
        assert_eq!(ex.chain.summary(), "a(2), b(1)");
        assert_eq!(ex.back_edges, vec![("b".into(), "a".into(), 1)]);
        assert_eq!(ex.violations, 1);
    }

    #[test]
    fn quantity_is_rounded_up_median() {
        let seqs: Vec<_> = [&["x"; 3][..], &["x"; 4][..]]
            .iter()
            .enumerate()
            .map(|(i, g)| extract_events(&episode_from_gains(g), i))
            .collect();
        let g = build_graph(&seqs).unwrap();
        assert_eq!(graph_to_chain(&g, &seqs).unwrap().chain.summary(), "x(4)");
    }

    #[test]
    fn ties_break_by_name() {
        let s1 = extract_events(&episode_from_gains(&["b", "a"]), 0);
        let s2 = extract_events(&episode_from_gains(&["a", "b"]), 1);
        let g = build_graph(&[s1.clone(), s2.clone()]).unwrap();
        let ex = graph_to_chain(&g, &[s1, s2]).unwrap();
        assert_eq!(ex.chain.summary(), "a(1), b(1)");
    }

    #[test]
    fn pseudo_reward_counts_only_active_item() {
        let g = SubgoalId::for_item("log", 3);
        let delta: Inventory = [("log", 2)].into_iter().collect();
        assert_eq!(pseudo_reward(&delta, &g), 2.0);
        let delta: Inventory = [("planks", 1)].into_iter().collect();
        assert_eq!(pseudo_reward(&delta, &g), 0.0);
        assert_eq!(pseudo_reward(&Inventory::new(), &g), 0.0);
    }

    #[test]
    fn flat_chain_never_terminates() {
        let c = SubtaskChain::flat("solve");
        let inv: Inventory = [("anything", 100)].into_iter().collect();
        assert!(!c.links[0].is_met(&inv));
        assert_eq!(c.links[0].reward(&inv, -0.25), -0.25);
    }

    #[test]
    fn chain_rejects_duplicates_and_empty() {
        assert!(SubtaskChain::new(vec![], RewardSpec::Pseudo).is_err());
        let g = SubgoalId::for_item("log", 1);
        assert!(SubtaskChain::new(vec![g.clone(), g], RewardSpec::Pseudo).is_err());
    }
}
