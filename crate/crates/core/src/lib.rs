//! Focused skill discovery in factored gridworlds.
//!
//! Environments with slip dynamics, tabular Q-learning, VIC/DIAYN/LSD skill
//! discovery with their focused and DUSDi variants, downstream skill
//! selection, coverage and side-effect evaluation, and experiment plumbing.

pub mod discovery;
pub mod downstream;
pub mod env;
pub mod evaluation;
pub mod experiments;
pub mod learner;
pub mod rng;
pub mod skills;

pub use discovery::{train_skills, Algorithm, DiscoveryConfig, DiscoveryOutcome, EwmaDiscriminator, LinearPhi, PenaltyWeights};
pub use env::{Action, Direction, Env, EnvKind, EnvState, FactoredState, Pos, StateKey, VarKind, VarValue, VariableSchema};
pub use learner::{LearnerParams, QTable};
pub use skills::{History, SkillSet, SkillSpec, NUM_SKILLS};
pub use experiments::{Checkpoint, ExperimentConfig, ExperimentError, MetricRow};
