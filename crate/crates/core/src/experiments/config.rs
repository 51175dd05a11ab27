use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::discovery::{Algorithm, DiscoveryConfig, StartDistribution, VicUpdateOrder};
use crate::downstream::{selection_decay, step_budget, RewardMode, TaskSpec};
use crate::env::EnvKind;
use crate::evaluation::CoverageMode;
use crate::learner::LearnerParams;
use crate::skills::{max_steps, NUM_SKILLS};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Named penalty-strength settings for focused algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaPreset {
    /// 10 for focused VIC/DIAYN, 2 for focused LSD.
    Main,
    /// 4 for focused VIC/DIAYN, 2 for focused LSD.
    Tuned,
}

impl LambdaPreset {
    pub fn lambda(self, algorithm: Algorithm) -> f64 {
        match (self, algorithm) {
            (_, Algorithm::FocusedLsd) => 2.0,
            (LambdaPreset::Main, a) if a.is_focused() => 10.0,
            (LambdaPreset::Tuned, a) if a.is_focused() => 4.0,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub epsilon0: f64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let p = LearnerParams::default();
        Self { gamma: p.gamma, alpha: p.alpha, kappa: p.kappa, epsilon0: p.epsilon0 }
    }
}

impl LearnerSection {
    pub fn params(&self) -> LearnerParams {
        LearnerParams { gamma: self.gamma, alpha: self.alpha, kappa: self.kappa, epsilon0: self.epsilon0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverySection {
    /// Discovery episodes `M`.
    pub episodes: u64,
    /// EWMA weight; `None` picks the per-environment default.
    pub ewma_weight: Option<f64>,
    pub phi_learning_rate: f64,
    /// Explicit penalty strength, overriding `lambda_preset`.
    pub lambda: Option<f64>,
    pub lambda_preset: LambdaPreset,
    pub beta: f64,
    /// Flip the focused LSD difference to initial-minus-final.
    pub lsd_flip_sign: bool,
    pub start: StartDistribution,
    pub vic_order: VicUpdateOrder,
    pub epsilon_per_skill: bool,
}

impl Default for DiscoverySection {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            ewma_weight: None,
            phi_learning_rate: 0.1,
            lambda: None,
            lambda_preset: LambdaPreset::Main,
            beta: 0.1,
            lsd_flip_sign: false,
            start: StartDistribution::Chain { reset_prob: 0.5 },
            vic_order: VicUpdateOrder::RewardFirst,
            epsilon_per_skill: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillSection {
    pub count: usize,
    /// Per-skill step cap; `None` picks 40 (FourRooms) or 20.
    pub max_steps: Option<usize>,
}

impl Default for SkillSection {
    fn default() -> Self {
        Self { count: NUM_SKILLS, max_steps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub mode: RewardMode,
    pub runs: u32,
    pub episodes: u64,
    /// Skill-selection exploration decay; `None` picks the per-environment default.
    pub decay: Option<f64>,
    /// Episodes averaged for end-of-training summaries.
    pub window: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self { mode: RewardMode::True, runs: 50, episodes: 5_000, decay: None, window: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    /// Longest chain; curves cover lengths `1..=max_length`.
    pub max_length: usize,
    pub starts: usize,
    pub mode: CoverageMode,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self { max_length: 4, starts: 10, mode: CoverageMode::Exhaustive }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub lambdas: Vec<f64>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { lambdas: vec![0.0, 2.0, 10.0] }
    }
}

/// Everything one experiment command needs. Missing JSON fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub learner: LearnerSection,
    pub discovery: DiscoverySection,
    pub skills: SkillSection,
    pub task: TaskSection,
    pub coverage: CoverageSection,
    pub ablation: AblationSection,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            env: EnvKind::FourRooms,
            algorithm: Algorithm::FocusedVic,
            seed: 0,
            learner: LearnerSection::default(),
            discovery: DiscoverySection::default(),
            skills: SkillSection::default(),
            task: TaskSection::default(),
            coverage: CoverageSection::default(),
            ablation: AblationSection::default(),
            out_dir: PathBuf::from("results"),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid { field: field.to_string(), message: message.into() }
}

fn check(ok: bool, field: &str, message: &str) -> Result<(), ExperimentError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, message))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        check(self.format_version == CONFIG_FORMAT_VERSION, "format_version", "unsupported version")?;
        let l = &self.learner;
        check((0.0..1.0).contains(&l.gamma), "learner.gamma", "must lie in [0, 1)")?;
        check(l.alpha > 0.0 && l.alpha <= 1.0, "learner.alpha", "must lie in (0, 1]")?;
        check(l.kappa >= 0.0 && l.kappa.is_finite(), "learner.kappa", "must be nonnegative")?;
        check((0.0..=1.0).contains(&l.epsilon0), "learner.epsilon0", "must lie in [0, 1]")?;
        let d = &self.discovery;
        if let Some(w) = d.ewma_weight {
            check(w > 0.0 && w <= 1.0, "discovery.ewma_weight", "must lie in (0, 1]")?;
        }
        check(d.phi_learning_rate > 0.0 && d.phi_learning_rate.is_finite(), "discovery.phi_learning_rate", "must be positive")?;
        if let Some(lambda) = d.lambda {
            check(lambda >= 0.0 && lambda.is_finite(), "discovery.lambda", "must be nonnegative")?;
        }
        check(d.beta >= 0.0 && d.beta.is_finite(), "discovery.beta", "must be nonnegative")?;
        match d.start {
            StartDistribution::Chain { reset_prob } => {
                check((0.0..=1.0).contains(&reset_prob), "discovery.start.reset_prob", "must lie in [0, 1]")?
            }
            StartDistribution::Mixture { canonical_prob } => {
                check((0.0..=1.0).contains(&canonical_prob), "discovery.start.canonical_prob", "must lie in [0, 1]")?
            }
            StartDistribution::Canonical | StartDistribution::Uniform => {}
        }
        check(self.skills.count == NUM_SKILLS, "skills.count", "only 16 skills are supported")?;
        if let Some(m) = self.skills.max_steps {
            check(m > 0, "skills.max_steps", "must be positive")?;
        }
        let t = &self.task;
        check(t.runs > 0, "task.runs", "must be positive")?;
        check(t.window > 0, "task.window", "must be positive")?;
        if let Some(decay) = t.decay {
            check(decay >= 0.0 && decay.is_finite(), "task.decay", "must be nonnegative")?;
        }
        check(!(self.env == EnvKind::FourRooms && t.mode == RewardMode::Proxy), "task.mode", "fourrooms has no proxy task")?;
        check(self.coverage.max_length >= 1, "coverage.max_length", "must be at least 1")?;
        check(self.coverage.starts >= 1, "coverage.starts", "must be at least 1")?;
        for &lambda in &self.ablation.lambdas {
            check(lambda >= 0.0 && lambda.is_finite(), "ablation.lambdas", "values must be nonnegative")?;
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.discovery.lambda.unwrap_or_else(|| self.discovery.lambda_preset.lambda(self.algorithm))
    }

    /// Discovery settings for `env` (usually `self.env`).
    pub fn discovery_config_for(&self, env: EnvKind) -> DiscoveryConfig {
        let d = &self.discovery;
        DiscoveryConfig {
            episodes: d.episodes,
            learner: self.learner.params(),
            ewma_weight: d.ewma_weight.unwrap_or_else(|| self.algorithm.default_ewma_weight(env)),
            phi_learning_rate: d.phi_learning_rate,
            lambda: self.lambda(),
            beta: d.beta,
            lsd_sign: if d.lsd_flip_sign { -1.0 } else { 1.0 },
            max_steps: self.skills.max_steps.unwrap_or_else(|| max_steps(env)),
            start: d.start,
            vic_order: d.vic_order,
            epsilon_per_skill: d.epsilon_per_skill,
        }
    }

    pub fn discovery_config(&self) -> DiscoveryConfig {
        self.discovery_config_for(self.env)
    }

    pub fn task_spec(&self) -> Result<TaskSpec, ExperimentError> {
        let mut task = TaskSpec::new(self.env, self.task.mode, self.algorithm)?;
        task.episodes = self.task.episodes;
        task.budget = step_budget(self.env);
        task.decay = self.task.decay.unwrap_or_else(|| selection_decay(self.env, self.algorithm));
        Ok(task)
    }

    /// The config without its output directory, which never affects results.
    pub fn canonical(&self) -> Self {
        Self { out_dir: PathBuf::new(), ..self.clone() }
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serialises");
        Sha256::digest(&bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// `<out_dir>/<command>-<env>-<algorithm>-<hash>.<ext>`.
    pub fn output_path(&self, command: &str, ext: &str) -> PathBuf {
        self.out_dir.join(format!("{command}-{}-{}-{}.{ext}", self.env, self.algorithm, self.hash()))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
    ExperimentConfig::from_json(&text)
}
