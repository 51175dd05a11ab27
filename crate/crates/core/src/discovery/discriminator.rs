use rustc_hash::FxHashMap;

use super::DiscoveryError;
use crate::env::StateKey;

/// Tabular skill discriminator updated by an exponentially weighted moving average.
///
/// Each condition key maps to a distribution over a fixed support of skill
/// ids. Keys never seen read as uniform over the support.
#[derive(Clone, Debug, PartialEq)]
pub struct EwmaDiscriminator {
    support: Vec<usize>,
    slot: Vec<Option<usize>>,
    weight: f64,
    table: FxHashMap<StateKey, Box<[f64]>>,
}

impl EwmaDiscriminator {
    pub fn new(support: Vec<usize>, weight: f64) -> Self {
        assert!(!support.is_empty(), "discriminator support must be non-empty");
        assert!(weight > 0.0 && weight <= 1.0, "EWMA weight must lie in (0, 1]");
        let max = support.iter().copied().max().unwrap_or(0);
        let mut slot = vec![None; max + 1];
        for (i, &z) in support.iter().enumerate() {
            slot[z] = Some(i);
        }
        Self { support, slot, weight, table: FxHashMap::default() }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn uniform(&self) -> f64 {
        1.0 / self.support.len() as f64
    }

    fn slot_of(&self, skill: usize) -> Option<usize> {
        self.slot.get(skill).copied().flatten()
    }

    /// Distribution over the support, in support order.
    pub fn predict(&self, key: StateKey) -> Vec<f64> {
        match self.table.get(&key) {
            Some(p) => p.to_vec(),
            None => vec![self.uniform(); self.support.len()],
        }
    }

    /// Probability of `skill` at `key`; zero for skills outside the support.
    pub fn prob(&self, key: StateKey, skill: usize) -> f64 {
        let Some(slot) = self.slot_of(skill) else {
            return 0.0;
        };
        self.table.get(&key).map_or(self.uniform(), |p| p[slot])
    }

    /// `p <- (1 - w) p + w onehot(skill)` at `key`.
    pub fn update(&mut self, key: StateKey, skill: usize) -> Result<(), DiscoveryError> {
        let slot = self.slot_of(skill).ok_or(DiscoveryError::OutsideSupport(skill))?;
        let uniform = self.uniform();
        let n = self.support.len();
        let w = self.weight;
        let p = self.table.entry(key).or_insert_with(|| vec![uniform; n].into_boxed_slice());
        for v in p.iter_mut() {
            *v *= 1.0 - w;
        }
        p[slot] += w;
        Ok(())
    }

    pub fn sorted_rows(&self) -> Vec<(StateKey, Vec<f64>)> {
        let mut rows: Vec<_> = self.table.iter().map(|(k, v)| (*k, v.to_vec())).collect();
        rows.sort_by_key(|(k, _)| *k);
        rows
    }

    pub fn with_rows(mut self, rows: impl IntoIterator<Item = (StateKey, Vec<f64>)>) -> Result<Self, DiscoveryError> {
        let n = self.support.len();
        for (key, row) in rows {
            if row.len() != n {
                return Err(DiscoveryError::Shape(format!("discriminator row of length {} for support {n}", row.len())));
            }
            self.table.insert(key, row.into_boxed_slice());
        }
        Ok(self)
    }
}
