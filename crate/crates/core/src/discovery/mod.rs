//! Skill discovery: discriminators, penalties, representations, rewards and trainers.

pub mod discriminator;
pub mod penalty;
pub mod phi;
pub mod rewards;
pub mod trainer;

use thiserror::Error;

pub use discriminator::EwmaDiscriminator;
pub use penalty::{side_effect_count, side_effects_penalty, PenaltyWeights};
pub use phi::{state_feature_dim, state_features, variable_feature, LinearPhi};
pub use trainer::{
    train_skills, Algorithm, DiscoveryConfig, DiscoveryOutcome, EpisodeTrace, Family, RewardModel, StartDistribution, VicUpdateOrder,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscoveryError {
    #[error("skill {0} is outside the discriminator support")]
    OutsideSupport(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite entry in representation matrix")]
    NonFinite,
    #[error("skill {0} has no target variables")]
    EmptyTargets(usize),
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error("invalid discovery config: {0}")]
    InvalidConfig(String),
}
