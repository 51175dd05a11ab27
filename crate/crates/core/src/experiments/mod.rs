//! Experiment configuration, checkpoints, CSV/JSON outputs and the commands behind the CLI.

pub mod checkpoint;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::discovery::{train_skills, DiscoveryError};
use crate::downstream::{train_skill_selection, RewardMode, RunResult, TaskError};
use crate::env::{EnvError, EnvKind};
use crate::evaluation::{coverage_curve, coverage_starts, run_ablation, side_effects_estimate, EvalError};
use crate::rng::{derive_seed, stream};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{load_config, ExperimentConfig, LambdaPreset, CONFIG_FORMAT_VERSION};
pub use output::{aggregate, percentile, read_rows, write_rows, MetricRow, Report, Summary, CSV_HEADER};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("checkpoint was trained on {checkpoint} but the config names {config}")]
    EnvMismatch { checkpoint: EnvKind, config: EnvKind },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<csv::Error> for ExperimentError {
    fn from(e: csv::Error) -> Self {
        ExperimentError::Csv(e.to_string())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Files written by [`cmd_discover`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscoverOutput {
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
}

/// Rollouts per skill for the side-effect estimates written next to a checkpoint.
pub const SIDE_EFFECT_SAMPLES: usize = 100;

/// Trains a skill set and writes its checkpoint plus a per-episode trace CSV.
pub fn cmd_discover(cfg: &ExperimentConfig) -> Result<DiscoverOutput, ExperimentError> {
    cfg.validate()?;
    let env = cfg.env.build();
    let dcfg = cfg.discovery_config();
    let mut rng = stream(cfg.seed, "discover", &[]);
    let outcome = train_skills(&env, cfg.algorithm, &dcfg, &mut rng)?;
    let ckpt = Checkpoint::capture(cfg, &outcome.skills, &outcome.model);
    let checkpoint = cfg.output_path("discover", "json");
    ckpt.save(&checkpoint)?;

    let row = |metric: &str, x: f64, value: f64| MetricRow {
        metric: metric.to_string(),
        env: cfg.env.to_string(),
        algorithm: cfg.algorithm.to_string(),
        seed: cfg.seed,
        run: 0,
        episode_or_x: x,
        value,
    };
    let mut rows: Vec<MetricRow> = Vec::with_capacity(outcome.trace.len() * 2 + outcome.skills.len());
    for (e, t) in outcome.trace.iter().enumerate() {
        rows.push(row("discovery_return", e as f64, t.ret));
        rows.push(row("discovery_steps", e as f64, t.steps as f64));
    }
    let s0 = env.initial_state();
    for z in 0..outcome.skills.len() {
        let mut eval_rng = stream(cfg.seed, "discover-side-effects", &[z as u64]);
        let mean = side_effects_estimate(&env, &outcome.skills, z, &s0, SIDE_EFFECT_SAMPLES, &mut eval_rng)?;
        rows.push(row("skill_side_effects", z as f64, mean));
    }
    let trace = cfg.output_path("discover-trace", "csv");
    write_rows(&trace, &rows)?;
    Ok(DiscoverOutput { checkpoint, trace })
}

fn load_matching(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<Checkpoint, ExperimentError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    if ckpt.env != cfg.env {
        return Err(ExperimentError::EnvMismatch { checkpoint: ckpt.env, config: cfg.env });
    }
    Ok(ckpt)
}

/// The config with the checkpoint's algorithm, so task defaults follow the skills.
fn effective(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> ExperimentConfig {
    let mut eff = cfg.clone();
    eff.algorithm = ckpt.algorithm;
    eff
}

fn stamped(cfg: &ExperimentConfig, ckpt: &Checkpoint, command: &str, ext: &str) -> PathBuf {
    let h = short_hash(&[&cfg.hash(), &ckpt.config.hash()]);
    cfg.out_dir.join(format!("{command}-{}-{}-{h}.{ext}", cfg.env, cfg.algorithm))
}

/// CSV rows of downstream learning curves; the training return is named `return_metric`.
pub fn downstream_rows(env: EnvKind, algorithm: &str, seed: u64, runs: &[RunResult], return_metric: &str) -> Vec<MetricRow> {
    let mut rows = Vec::with_capacity(runs.iter().map(|r| r.records.len() * 4).sum());
    for r in runs {
        for rec in &r.records {
            let mut push = |metric: &str, value: f64| {
                rows.push(MetricRow {
                    metric: metric.to_string(),
                    env: env.to_string(),
                    algorithm: algorithm.to_string(),
                    seed,
                    run: rec.run,
                    episode_or_x: rec.episode as f64,
                    value,
                })
            };
            push(return_metric, rec.ret);
            push("true_success", if rec.true_success { 1.0 } else { 0.0 });
            push("epsilon", rec.epsilon);
            push("side_effects", rec.side_effects as f64);
        }
    }
    rows
}

/// Trains skill-selection policies on the checkpoint's skills and writes their learning curves.
pub fn cmd_downstream(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<PathBuf, ExperimentError> {
    cfg.validate()?;
    let ckpt = load_matching(cfg, checkpoint)?;
    let eff = effective(cfg, &ckpt);
    let env = eff.env.build();
    let skills = ckpt.skill_set()?;
    let task = eff.task_spec()?;
    let runs = train_skill_selection(&env, &skills, &task, &eff.learner.params(), eff.task.runs, derive_seed(eff.seed, "downstream", &[]))?;
    let metric = match eff.task.mode {
        RewardMode::True => "return",
        RewardMode::Proxy => "proxy_return",
    };
    let rows = downstream_rows(eff.env, &eff.algorithm.to_string(), eff.seed, &runs, metric);
    let path = stamped(&eff, &ckpt, &format!("downstream-{}", eff.task.mode), "csv");
    write_rows(&path, &rows)?;
    Ok(path)
}

/// JSON summary written by [`cmd_coverage`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub env: EnvKind,
    pub algorithm: String,
    pub seed: u64,
    pub lengths: Vec<usize>,
    /// Across-start summary of the coverage fraction at each length.
    pub fractions: Vec<Summary>,
    pub aucs: Vec<f64>,
    pub auc: Summary,
}

/// Files written by [`cmd_coverage`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageOutput {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Coverage curves of the checkpoint's skills from random start states.
pub fn coverage_summary(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> Result<(CoverageSummary, Vec<MetricRow>), ExperimentError> {
    let env = cfg.env.build();
    let skills = ckpt.skill_set()?;
    let starts = coverage_starts(&env, cfg.coverage.starts, derive_seed(cfg.seed, "coverage-starts", &[]));
    let mut rows = Vec::new();
    let mut curves = Vec::with_capacity(starts.len());
    for (i, s0) in starts.iter().enumerate() {
        let curve = coverage_curve(&env, &skills, s0, cfg.coverage.max_length, cfg.coverage.mode, derive_seed(cfg.seed, "coverage", &[i as u64]))?;
        for (&l, &f) in curve.lengths.iter().zip(&curve.fractions) {
            rows.push(MetricRow {
                metric: "coverage".into(),
                env: cfg.env.to_string(),
                algorithm: ckpt.algorithm.to_string(),
                seed: cfg.seed,
                run: i as u32,
                episode_or_x: l as f64,
                value: f,
            });
        }
        curves.push(curve);
    }
    let lengths: Vec<usize> = (1..=cfg.coverage.max_length).collect();
    let fractions = (0..lengths.len()).map(|k| Summary::of(&curves.iter().map(|c| c.fractions[k]).collect::<Vec<_>>())).collect();
    let aucs: Vec<f64> = curves.iter().map(|c| c.auc).collect();
    let summary = CoverageSummary {
        env: cfg.env,
        algorithm: ckpt.algorithm.to_string(),
        seed: cfg.seed,
        lengths,
        fractions,
        auc: Summary::of(&aucs),
        aucs,
    };
    Ok((summary, rows))
}

pub fn cmd_coverage(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<CoverageOutput, ExperimentError> {
    cfg.validate()?;
    let ckpt = load_matching(cfg, checkpoint)?;
    let eff = effective(cfg, &ckpt);
    let (summary, rows) = coverage_summary(&eff, &ckpt)?;
    let csv = stamped(&eff, &ckpt, "coverage", "csv");
    write_rows(&csv, &rows)?;
    let json = stamped(&eff, &ckpt, "coverage", "json");
    write_file(&json, serde_json::to_string_pretty(&summary).expect("summary serialises").as_bytes())?;
    Ok(CoverageOutput { csv, json })
}

/// MudWorld discovery plus true-task learning for each penalty strength; one CSV per strength.
pub fn cmd_ablate(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<PathBuf>, ExperimentError> {
    cfg.validate()?;
    let mut eff = cfg.clone();
    eff.env = EnvKind::MudWorld;
    eff.ablation.lambdas = lambdas.to_vec();
    eff.validate()?;
    let base = eff.discovery_config_for(EnvKind::MudWorld);
    let points = run_ablation(eff.algorithm, lambdas, &base, eff.task.episodes, eff.task.runs, derive_seed(eff.seed, "ablate", &[]))?;
    let hash = eff.hash();
    points
        .iter()
        .map(|p| {
            let label = format!("{}@lambda={}", eff.algorithm, p.lambda);
            let rows = downstream_rows(EnvKind::MudWorld, &label, eff.seed, &p.runs, "return");
            let path = eff.out_dir.join(format!("ablate-mudworld-{}-lambda{}-{hash}.csv", eff.algorithm, p.lambda));
            write_rows(&path, &rows)?;
            Ok(path)
        })
        .collect()
}

/// Aggregates every CSV in `dir` into `<out>/report-w<window>.json`.
pub fn cmd_report(dir: &Path, out: &Path, window: usize) -> Result<PathBuf, ExperimentError> {
    let io = |source| ExperimentError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_rows(f)?);
    }
    let report = aggregate(&rows, window);
    let path = out.join(format!("report-w{window}.json"));
    write_file(&path, serde_json::to_string_pretty(&report).expect("report serialises").as_bytes())?;
    Ok(path)
}
