use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError};
use crate::discovery::{Algorithm, EwmaDiscriminator, LinearPhi, PenaltyWeights, RewardModel};
use crate::env::{Action, EnvKind, StateKey};
use crate::learner::QTable;
use crate::rng::DERIVATION;
use crate::skills::{SkillSet, SkillSpec};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

type Rows = Vec<(StateKey, Vec<f64>)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSnapshot {
    pub support: Vec<usize>,
    pub weight: f64,
    pub rows: Rows,
}

impl DiscriminatorSnapshot {
    pub fn capture(d: &EwmaDiscriminator) -> Self {
        Self { support: d.support().to_vec(), weight: d.weight(), rows: d.sorted_rows() }
    }

    pub fn restore(&self) -> Result<EwmaDiscriminator, ExperimentError> {
        if self.support.is_empty() || !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(ExperimentError::Checkpoint("malformed discriminator".into()));
        }
        Ok(EwmaDiscriminator::new(self.support.clone(), self.weight).with_rows(self.rows.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillSnapshot {
    pub spec: SkillSpec,
    pub q: Rows,
}

/// Everything needed to evaluate a trained skill set or resume its reward model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// How the discovery stream was derived from `seed`.
    pub rng: String,
    pub max_steps: usize,
    pub skills: Vec<SkillSnapshot>,
    pub global: Option<DiscriminatorSnapshot>,
    pub per_target: Vec<Option<DiscriminatorSnapshot>>,
    pub penalty: Vec<Option<DiscriminatorSnapshot>>,
    pub phi: Option<LinearPhi>,
    pub per_target_phi: Vec<Option<LinearPhi>>,
    pub weights: PenaltyWeights,
    pub beta: f64,
    pub lsd_sign: f64,
}

fn snap_all(ds: &[Option<EwmaDiscriminator>]) -> Vec<Option<DiscriminatorSnapshot>> {
    ds.iter().map(|d| d.as_ref().map(DiscriminatorSnapshot::capture)).collect()
}

fn restore_all(ds: &[Option<DiscriminatorSnapshot>]) -> Result<Vec<Option<EwmaDiscriminator>>, ExperimentError> {
    ds.iter().map(|d| d.as_ref().map(|s| s.restore()).transpose()).collect()
}

impl Checkpoint {
    pub fn capture(config: &ExperimentConfig, skills: &SkillSet, model: &RewardModel) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.canonical(),
            env: config.env,
            algorithm: config.algorithm,
            seed: config.seed,
            rng: format!("discover stream: {DERIVATION}, tag \"discover\", empty path"),
            max_steps: skills.max_steps,
            skills: skills
                .specs
                .iter()
                .zip(&skills.policies)
                .map(|(spec, q)| SkillSnapshot { spec: spec.clone(), q: q.sorted_rows() })
                .collect(),
            global: model.global.as_ref().map(DiscriminatorSnapshot::capture),
            per_target: snap_all(&model.per_target),
            penalty: snap_all(&model.penalty),
            phi: model.phi.clone(),
            per_target_phi: model.per_target_phi.clone(),
            weights: model.weights.clone(),
            beta: model.beta,
            lsd_sign: model.lsd_sign,
        }
    }

    pub fn skill_set(&self) -> Result<SkillSet, ExperimentError> {
        let specs = self.skills.iter().map(|s| s.spec.clone()).collect();
        let mut set = SkillSet::new(specs, self.max_steps);
        for (slot, snap) in set.policies.iter_mut().zip(&self.skills) {
            *slot = QTable::from_rows(Action::COUNT, snap.q.clone()).map_err(|e| ExperimentError::Checkpoint(e.to_string()))?;
        }
        Ok(set)
    }

    pub fn reward_model(&self) -> Result<RewardModel, ExperimentError> {
        Ok(RewardModel {
            algorithm: self.algorithm,
            global: self.global.as_ref().map(|s| s.restore()).transpose()?,
            per_target: restore_all(&self.per_target)?,
            penalty: restore_all(&self.penalty)?,
            phi: self.phi.clone(),
            per_target_phi: self.per_target_phi.clone(),
            weights: self.weights.clone(),
            beta: self.beta,
            lsd_sign: self.lsd_sign,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ExperimentError::Schema(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_FORMAT_VERSION as u64) {
            return Err(ExperimentError::Checkpoint(format!("unsupported format_version {version:?}")));
        }
        let ckpt: Self = serde_json::from_value(value).map_err(|e| ExperimentError::Schema(e.to_string()))?;
        if ckpt.skills.len() != ckpt.config.skills.count {
            return Err(ExperimentError::Checkpoint(format!("expected {} skills, found {}", ckpt.config.skills.count, ckpt.skills.len())));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        super::write_file(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}
