//! Tabular Q-learning shared by skill policies and skill-selection policies.

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::StateKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("skill duration must be at least 1")]
    ZeroDuration,
    #[error("action {action} out of range for a table with {count} actions")]
    ActionOutOfRange { action: usize, count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub epsilon0: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self { gamma: 0.99, alpha: 0.1, kappa: 0.0005, epsilon0: 1.0 }
    }
}

/// Exploration rate after `episode` episodes of exponential decay.
pub fn epsilon_schedule(epsilon0: f64, kappa: f64, episode: u64) -> f64 {
    epsilon0 * (-kappa * episode as f64).exp()
}

/// Sparse Q-table; missing rows read as all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    actions: usize,
    rows: FxHashMap<StateKey, Box<[f64]>>,
}

impl QTable {
    pub fn new(actions: usize) -> Self {
        assert!(actions > 0, "a Q-table needs at least one action");
        Self { actions, rows: FxHashMap::default() }
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: StateKey, action: usize) -> f64 {
        self.rows.get(&key).map_or(0.0, |row| row[action])
    }

    pub fn row(&self, key: StateKey) -> Option<&[f64]> {
        self.rows.get(&key).map(|r| &r[..])
    }

    fn row_mut(&mut self, key: StateKey) -> &mut [f64] {
        let n = self.actions;
        self.rows.entry(key).or_insert_with(|| vec![0.0; n].into_boxed_slice())
    }

    pub fn set(&mut self, key: StateKey, action: usize, value: f64) {
        self.row_mut(key)[action] = value;
    }

    pub fn max_value(&self, key: StateKey) -> f64 {
        match self.rows.get(&key) {
            Some(row) => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }

    /// Greedy action, lowest index on ties.
    pub fn greedy(&self, key: StateKey) -> usize {
        self.rows.get(&key).map_or(0, |row| argmax(row))
    }

    /// Rows sorted by key, for stable serialisation.
    pub fn sorted_rows(&self) -> Vec<(StateKey, Vec<f64>)> {
        let mut rows: Vec<_> = self.rows.iter().map(|(k, v)| (*k, v.to_vec())).collect();
        rows.sort_by_key(|(k, _)| *k);
        rows
    }

    pub fn from_rows(actions: usize, rows: impl IntoIterator<Item = (StateKey, Vec<f64>)>) -> Result<Self, LearnerError> {
        let mut table = Self::new(actions);
        for (key, values) in rows {
            if values.len() != actions {
                return Err(LearnerError::ActionOutOfRange { action: values.len(), count: actions });
            }
            table.rows.insert(key, values.into_boxed_slice());
        }
        Ok(table)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn epsilon_greedy_action<R: Rng + ?Sized>(table: &QTable, key: StateKey, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..table.action_count())
    } else {
        table.greedy(key)
    }
}

/// One-step Q-learning backup.
pub fn q_update(
    table: &mut QTable,
    key: StateKey,
    action: usize,
    reward: f64,
    next_key: StateKey,
    terminal: bool,
    params: &LearnerParams,
) {
    let bootstrap = if terminal { 0.0 } else { params.gamma * table.max_value(next_key) };
    let q = &mut table.row_mut(key)[action];
    *q += params.alpha * (reward + bootstrap - *q);
}

/// SMDP backup for a temporally extended action lasting `duration` primitive steps.
///
/// `discounted_return` is the reward accumulated inside the skill, already
/// discounted to the step at which the skill was selected.
#[allow(clippy::too_many_arguments)]
pub fn smdp_q_update(
    table: &mut QTable,
    key: StateKey,
    skill: usize,
    discounted_return: f64,
    duration: u32,
    next_key: StateKey,
    terminal: bool,
    params: &LearnerParams,
) -> Result<(), LearnerError> {
    if duration < 1 {
        return Err(LearnerError::ZeroDuration);
    }
    if skill >= table.action_count() {
        return Err(LearnerError::ActionOutOfRange { action: skill, count: table.action_count() });
    }
    let bootstrap = if terminal {
        0.0
    } else {
        params.gamma.powi(duration as i32) * table.max_value(next_key)
    };
    let q = &mut table.row_mut(key)[skill];
    *q += params.alpha * (discounted_return + bootstrap - *q);
    Ok(())
}
