//! State coverage of skill chains, side-effect estimates and the penalty ablation.

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{penalty::side_effect_count, train_skills, Algorithm, DiscoveryConfig, DiscoveryError};
use crate::downstream::{train_skill_selection, RewardMode, RunResult, TaskError, TaskSpec};
use crate::env::{Action, Cell, Direction, Env, EnvKind, EnvState, StateKey};
use crate::learner::LearnerParams;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::skills::{execute_skill, SkillSet};
use rand::SeedableRng;

/// Largest number of chains the exhaustive mode will roll out.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("exhaustive coverage at length {length} needs {chains} chains, above the limit of {limit}")]
    Budget { length: usize, chains: u64, limit: u64 },
    #[error("chain length must be at least 1")]
    ZeroLength,
    #[error("AUC needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("need at least one sample")]
    NoSamples,
    #[error("skill {0} is out of range")]
    UnknownSkill(usize),
    #[error("exact enumeration needs a skill cap of at most {limit}, got {cap}")]
    TreeTooLarge { cap: usize, limit: usize },
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CoverageMode {
    Exhaustive,
    Sampled { chains: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub lengths: Vec<usize>,
    pub fractions: Vec<f64>,
    pub start: EnvState,
    pub auc: f64,
}

/// Seed of the rollout that extends the chain `prefix` by one skill.
fn chain_seed(seed: u64, prefix: &[usize]) -> u64 {
    let path: Vec<u64> = prefix.iter().map(|&z| z as u64).collect();
    derive_seed(seed, "coverage-chain", &path)
}

/// Greedy rollout of `chain`'s last skill from `state`, seeded by the chain.
fn extend(env: &Env, skills: &SkillSet, state: &EnvState, chain: &[usize], seed: u64) -> EnvState {
    let mut rng = StreamRng::seed_from_u64(chain_seed(seed, chain));
    let z = *chain.last().expect("non-empty chain");
    execute_skill(env, skills, z, state, 0.0, &mut rng).last().clone()
}

fn collect_tree(
    env: &Env,
    skills: &SkillSet,
    state: &EnvState,
    chain: &mut Vec<usize>,
    depth: usize,
    seed: u64,
    out: &mut [FxHashSet<StateKey>],
) {
    for z in 0..skills.len() {
        chain.push(z);
        let next = extend(env, skills, state, chain, seed);
        out[chain.len() - 1].insert(env.state_key(&next.obs));
        if chain.len() < depth {
            collect_tree(env, skills, &next, chain, depth, seed, out);
        }
        chain.pop();
    }
}

/// Unique final-state sets reached by chains of each length `1..=max_len`,
/// each set including every shorter prefix's endpoint.
fn reached_sets(
    env: &Env,
    skills: &SkillSet,
    s0: &EnvState,
    max_len: usize,
    mode: CoverageMode,
    seed: u64,
) -> Result<Vec<FxHashSet<StateKey>>, EvalError> {
    if max_len == 0 {
        return Err(EvalError::ZeroLength);
    }
    let per_depth = match mode {
        CoverageMode::Exhaustive => {
            let chains = (skills.len() as u64).saturating_pow(max_len as u32);
            if chains > EXHAUSTIVE_LIMIT {
                return Err(EvalError::Budget { length: max_len, chains, limit: EXHAUSTIVE_LIMIT });
            }
            (0..skills.len())
                .into_par_iter()
                .map(|z| {
                    let mut out = vec![FxHashSet::default(); max_len];
                    let mut chain = vec![z];
                    let next = extend(env, skills, s0, &chain, seed);
                    out[0].insert(env.state_key(&next.obs));
                    if max_len > 1 {
                        collect_tree(env, skills, &next, &mut chain, max_len, seed, &mut out);
                    }
                    out
                })
                .reduce(|| vec![FxHashSet::default(); max_len], merge)
        }
        CoverageMode::Sampled { chains } => {
            if chains == 0 {
                return Err(EvalError::NoSamples);
            }
            (0..chains)
                .into_par_iter()
                .map(|c| {
                    let mut pick = stream(seed, "coverage-sample", &[c as u64]);
                    let mut out = vec![FxHashSet::default(); max_len];
                    let mut chain = Vec::with_capacity(max_len);
                    let mut state = s0.clone();
                    for slot in out.iter_mut() {
                        chain.push(pick.random_range(0..skills.len()));
                        state = extend(env, skills, &state, &chain, seed);
                        slot.insert(env.state_key(&state.obs));
                    }
                    out
                })
                .reduce(|| vec![FxHashSet::default(); max_len], merge)
        }
    };
    let mut cumulative = Vec::with_capacity(max_len);
    let mut acc = FxHashSet::default();
    for set in per_depth {
        acc.extend(set);
        cumulative.push(acc.clone());
    }
    Ok(cumulative)
}

fn merge(mut a: Vec<FxHashSet<StateKey>>, b: Vec<FxHashSet<StateKey>>) -> Vec<FxHashSet<StateKey>> {
    for (x, y) in a.iter_mut().zip(b) {
        x.extend(y);
    }
    a
}

/// Fraction of observable states reached by chains of exactly `length` skills
/// (prefix endpoints included).
pub fn coverage_fraction(
    env: &Env,
    skills: &SkillSet,
    s0: &EnvState,
    length: usize,
    mode: CoverageMode,
    seed: u64,
) -> Result<f64, EvalError> {
    let sets = reached_sets(env, skills, s0, length, mode, seed)?;
    Ok(sets[length - 1].len() as f64 / env.state_count() as f64)
}

/// Coverage fractions for lengths `1..=max_len` and their AUC.
pub fn coverage_curve(
    env: &Env,
    skills: &SkillSet,
    s0: &EnvState,
    max_len: usize,
    mode: CoverageMode,
    seed: u64,
) -> Result<CoverageCurve, EvalError> {
    let sets = reached_sets(env, skills, s0, max_len, mode, seed)?;
    let total = env.state_count() as f64;
    let fractions: Vec<f64> = sets.iter().map(|s| s.len() as f64 / total).collect();
    let lengths: Vec<usize> = (1..=max_len).collect();
    let auc = if max_len >= 2 { coverage_auc(&lengths, &fractions)? } else { 0.0 };
    Ok(CoverageCurve { lengths, fractions, start: s0.clone(), auc })
}

/// Trapezoidal area under `fractions` against `lengths`.
pub fn coverage_auc(lengths: &[usize], fractions: &[f64]) -> Result<f64, EvalError> {
    if lengths.len() < 2 || lengths.len() != fractions.len() {
        return Err(EvalError::TooFewPoints(lengths.len().min(fractions.len())));
    }
    Ok(lengths
        .windows(2)
        .zip(fractions.windows(2))
        .map(|(l, f)| (l[1] - l[0]) as f64 * (f[0] + f[1]) / 2.0)
        .sum())
}

/// `count` distinct start states: random open cells, every other variable at its initial value.
pub fn coverage_starts(env: &Env, count: usize, seed: u64) -> Vec<EnvState> {
    let mut cells: Vec<_> = env.walkable().iter().copied().filter(|p| env.cell(*p) == Cell::Open).collect();
    let mut rng = stream(seed, "coverage-starts", &[]);
    let mut starts = Vec::with_capacity(count);
    while starts.len() < count && !cells.is_empty() {
        let pos = cells.swap_remove(rng.random_range(0..cells.len()));
        let mut s = env.initial_state();
        s.obs.pos = pos;
        starts.push(s);
    }
    starts
}

/// Monte-Carlo mean number of non-target variables a greedy rollout changes.
pub fn side_effects_estimate<R: Rng + ?Sized>(
    env: &Env,
    skills: &SkillSet,
    skill: usize,
    s0: &EnvState,
    samples: usize,
    rng: &mut R,
) -> Result<f64, EvalError> {
    if samples == 0 {
        return Err(EvalError::NoSamples);
    }
    let spec = skills.specs.get(skill).ok_or(EvalError::UnknownSkill(skill))?;
    let total: usize = (0..samples)
        .map(|_| {
            let h = execute_skill(env, skills, skill, s0, 0.0, rng);
            side_effect_count(&s0.obs, &h.last().obs, &spec.targets)
        })
        .sum();
    Ok(total as f64 / samples as f64)
}

/// Largest skill cap [`exact_side_effects`] will enumerate.
pub const EXACT_CAP_LIMIT: usize = 8;

/// Expected side-effect count of a greedy rollout, by summing over every slip outcome.
pub fn exact_side_effects(env: &Env, skills: &SkillSet, skill: usize, s0: &EnvState) -> Result<f64, EvalError> {
    let spec = skills.specs.get(skill).ok_or(EvalError::UnknownSkill(skill))?;
    if skills.max_steps > EXACT_CAP_LIMIT {
        return Err(EvalError::TreeTooLarge { cap: skills.max_steps, limit: EXACT_CAP_LIMIT });
    }
    fn walk(env: &Env, skills: &SkillSet, skill: usize, targets: &[usize], s0: &EnvState, s: &EnvState, left: usize) -> f64 {
        let done = || side_effect_count(&s0.obs, &s.obs, targets) as f64;
        if left == 0 {
            return done();
        }
        let action = Action::ALL[skills.policies[skill].greedy(env.state_key(&s.obs))];
        let Some(intended) = action.direction() else {
            return done();
        };
        let slip = env.slip();
        Direction::ALL
            .iter()
            .map(|&d| {
                let p = if d == intended { 1.0 - slip } else { slip / 3.0 };
                if p == 0.0 {
                    return 0.0;
                }
                p * walk(env, skills, skill, targets, s0, &env.move_agent(s, d), left - 1)
            })
            .sum()
    }
    Ok(walk(env, skills, skill, &spec.targets, s0, s0, skills.max_steps))
}

/// Downstream results of one penalty strength.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationPoint {
    pub lambda: f64,
    pub runs: Vec<RunResult>,
}

/// Discovery with each `lambda`, then the MudWorld true task on the resulting skills.
pub fn run_ablation(
    algorithm: Algorithm,
    lambdas: &[f64],
    base: &DiscoveryConfig,
    task_episodes: u64,
    runs: u32,
    seed: u64,
) -> Result<Vec<AblationPoint>, EvalError> {
    let env = EnvKind::MudWorld.build();
    lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let mut cfg = base.clone();
            cfg.lambda = lambda;
            let mut rng = stream(seed, "ablation-discover", &[k as u64]);
            let outcome = train_skills(&env, algorithm, &cfg, &mut rng)?;
            let mut task = TaskSpec::new(env.kind(), RewardMode::True, algorithm)?;
            task.episodes = task_episodes;
            let results = train_skill_selection(
                &env,
                &outcome.skills,
                &task,
                &LearnerParams::default(),
                runs,
                derive_seed(seed, "ablation-downstream", &[k as u64]),
            )?;
            Ok(AblationPoint { lambda, runs: results })
        })
        .collect()
}
