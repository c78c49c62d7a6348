use std::collections::BTreeMap;

use crate::error::{ForgerError, Result};

/// Exact state key: the bit patterns of the observation features, with
/// negative zero folded into positive zero.
pub type StateKey = Vec<u64>;

pub fn state_key(obs: &[f64]) -> StateKey {
    obs.iter()
        .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect()
}

pub fn key_to_obs(key: &StateKey) -> Vec<f64> {
    key.iter().map(|&b| f64::from_bits(b)).collect()
}

/// Lookup table of action values; unseen states read as zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    input_dim: usize,
    num_actions: usize,
    table: BTreeMap<StateKey, Vec<f64>>,
}

impl TabularQ {
    pub fn new(input_dim: usize, num_actions: usize) -> Result<Self> {
        if num_actions == 0 {
            return Err(ForgerError::InvalidConfig(
                "tabular Q needs >= 1 action".into(),
            ));
        }
        Ok(TabularQ {
            input_dim,
            num_actions,
            table: BTreeMap::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&StateKey, &Vec<f64>)> {
        self.table.iter()
    }

    pub fn check(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.input_dim {
            return Err(ForgerError::Dimension {
                expected: self.input_dim,
                actual: obs.len(),
            });
        }
        Ok(())
    }

    pub fn forward_one(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check(obs)?;
        Ok(self
            .table
            .get(&state_key(obs))
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_actions]))
    }

    pub fn row_mut(&mut self, key: &StateKey) -> &mut Vec<f64> {
        let n = self.num_actions;
        self.table
            .entry(key.clone())
            .or_insert_with(|| vec![0.0; n])
    }

    pub fn insert_row(&mut self, key: StateKey, values: Vec<f64>) -> Result<()> {
        if values.len() != self.num_actions || key.len() != self.input_dim {
            return Err(ForgerError::Dimension {
                expected: self.num_actions,
                actual: values.len(),
            });
        }
        self.table.insert(key, values);
        Ok(())
    }

    pub fn l2(&self) -> f64 {
        self.table.values().flatten().map(|v| v * v).sum()
    }
}
