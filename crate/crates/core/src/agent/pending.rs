use std::collections::VecDeque;

use crate::types::Transition;

/// Holds online transitions until their n-step window is known.
///
/// Pushed transitions carry the 1-step fields; emitted ones also carry the
/// n-step return, bootstrap observation, and terminal flag.
#[derive(Clone, Debug)]
pub struct PendingWindow {
    n: usize,
    gamma: f64,
    queue: VecDeque<Transition>,
}

impl PendingWindow {
    pub fn new(n: usize, gamma: f64) -> Self {
        PendingWindow {
            n: n.max(1),
            gamma,
            queue: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    fn emit_front(&mut self) -> Transition {
        let mut ret = 0.0;
        let mut discount = 1.0;
        let mut n_eff = 0;
        let mut terminal = false;
        for t in self.queue.iter().take(self.n) {
            ret += discount * t.reward;
            discount *= self.gamma;
            n_eff += 1;
            if t.done {
                terminal = true;
                break;
            }
        }
        let n_obs = self.queue[n_eff - 1].next_obs.clone();
        let mut front = self.queue.pop_front().expect("non-empty window");
        front.n_return = ret;
        front.n_eff = n_eff;
        front.n_done = terminal;
        front.n_obs = n_obs;
        front
    }

    /// Adds a step; returns transitions whose full window is now known.
    pub fn push(&mut self, t: Transition) -> Vec<Transition> {
        self.queue.push_back(t);
        let mut out = Vec::new();
        while self.queue.len() >= self.n {
            out.push(self.emit_front());
        }
        out
    }

    /// Emits everything left with truncated windows.
    pub fn flush(&mut self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.queue.len());
        while !self.queue.is_empty() {
            out.push(self.emit_front());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{
        compute_nstep, Action, Episode, EpisodeStep, Inventory, Observation, Source,
    };

    fn base(i: usize, r: f64, done: bool) -> Transition {
        Transition {
            obs: Observation(vec![i as f64]),
            action: Action(0),
            reward: r,
            next_obs: Observation(vec![i as f64 + 1.0]),
            done,
            n_return: 0.0,
            n_obs: Observation(vec![]),
            n_eff: 0,
            n_done: false,
            subgoal: "g".into(),
            margin_mask: 0.0,
            source: Source::Agent,
        }
    }

    #[test]
    fn matches_offline_nstep() {
        let rewards = [1.0, -2.0, 0.5, 3.0, 0.25, -1.0, 2.0];
        let ep = Episode {
            env_name: "t".into(),
            seed: 0,
            steps: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| EpisodeStep {
                    obs: Observation(vec![i as f64]),
                    action: Action(0),
                    raw_action: None,
                    reward: r,
                    inventory: Inventory::new(),
                    done: i + 1 == rewards.len(),
                })
                .collect(),
            final_obs: Observation(vec![rewards.len() as f64]),
        };
        let mut w = PendingWindow::new(3, 0.9);
        let mut emitted = Vec::new();
        for (i, &r) in rewards.iter().enumerate() {
            emitted.extend(w.push(base(i, r, i + 1 == rewards.len())));
        }
        assert_eq!(emitted.len(), 5);
        emitted.extend(w.flush());
        assert!(w.is_empty());
        for (t, tr) in emitted.iter().enumerate() {
            let oracle = compute_nstep(&ep, t, 3, 0.9).unwrap();
            assert!((tr.n_return - oracle.n_return).abs() < 1e-12);
            assert_eq!(tr.n_eff, oracle.n_eff);
            assert_eq!(tr.n_done, oracle.terminal);
            assert_eq!(tr.n_obs, oracle.n_obs);
        }
    }

    #[test]
    fn one_step_window_is_immediate() {
        let mut w = PendingWindow::new(1, 0.5);
        let out = w.push(base(0, 2.0, false));
        assert_eq!(out.len(), 1);
        assert_eq!(
            (out[0].n_return, out[0].n_eff, out[0].n_done),
            (2.0, 1, false)
        );
    }
}
