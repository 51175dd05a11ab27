use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::EwmaDiscriminator;
use super::penalty::{side_effects_penalty, PenaltyWeights};
use super::phi::{state_feature_dim, state_features, variable_feature, LinearPhi};
use super::rewards::{dusdi_reward, focused_lsd_reward, focused_mi_reward, log_ratio, lsd_reward};
use super::DiscoveryError;
use crate::env::{Action, Env, EnvKind, EnvState, FactoredState, StateKey};
use crate::learner::{epsilon_greedy_action, epsilon_schedule, q_update, LearnerParams};
use crate::skills::{baseline_skill_assignment, default_skill_assignment, execute_skill, max_steps, SkillSet, SkillSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Vic,
    Diayn,
    Lsd,
    FocusedVic,
    FocusedDiayn,
    FocusedLsd,
    DusdiVic,
    DusdiDiayn,
}

/// The base mutual-information estimator an algorithm builds on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Vic,
    Diayn,
    Lsd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Vic,
        Algorithm::Diayn,
        Algorithm::Lsd,
        Algorithm::FocusedVic,
        Algorithm::FocusedDiayn,
        Algorithm::FocusedLsd,
        Algorithm::DusdiVic,
        Algorithm::DusdiDiayn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vic => "vic",
            Algorithm::Diayn => "diayn",
            Algorithm::Lsd => "lsd",
            Algorithm::FocusedVic => "focused-vic",
            Algorithm::FocusedDiayn => "focused-diayn",
            Algorithm::FocusedLsd => "focused-lsd",
            Algorithm::DusdiVic => "dusdi-vic",
            Algorithm::DusdiDiayn => "dusdi-diayn",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Algorithm::Vic | Algorithm::FocusedVic | Algorithm::DusdiVic => Family::Vic,
            Algorithm::Diayn | Algorithm::FocusedDiayn | Algorithm::DusdiDiayn => Family::Diayn,
            Algorithm::Lsd | Algorithm::FocusedLsd => Family::Lsd,
        }
    }

    pub fn is_focused(self) -> bool {
        matches!(self, Algorithm::FocusedVic | Algorithm::FocusedDiayn | Algorithm::FocusedLsd)
    }

    pub fn is_dusdi(self) -> bool {
        matches!(self, Algorithm::DusdiVic | Algorithm::DusdiDiayn)
    }

    pub fn is_baseline(self) -> bool {
        !self.is_focused() && !self.is_dusdi()
    }

    /// Focused counterpart of a baseline algorithm.
    pub fn focused(self) -> Algorithm {
        match self.family() {
            Family::Vic => Algorithm::FocusedVic,
            Family::Diayn => Algorithm::FocusedDiayn,
            Family::Lsd => Algorithm::FocusedLsd,
        }
    }

    /// Baseline counterpart.
    pub fn baseline(self) -> Algorithm {
        match self.family() {
            Family::Vic => Algorithm::Vic,
            Family::Diayn => Algorithm::Diayn,
            Family::Lsd => Algorithm::Lsd,
        }
    }

    pub fn skill_specs(self, kind: EnvKind) -> Vec<SkillSpec> {
        if self.is_baseline() {
            baseline_skill_assignment()
        } else {
            default_skill_assignment(kind)
        }
    }

    /// Default EWMA weight for the algorithm's discriminators.
    pub fn default_ewma_weight(self, kind: EnvKind) -> f64 {
        match self.family() {
            Family::Diayn => 0.05,
            Family::Vic | Family::Lsd => match kind {
                EnvKind::FourRooms | EnvKind::MudWorld => 0.7,
                EnvKind::ForageWorld => 0.5,
            },
        }
    }

    /// Default side-effects penalty strength.
    pub fn default_lambda(self) -> f64 {
        match self {
            Algorithm::FocusedLsd => 2.0,
            a if a.is_focused() => 10.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = DiscoveryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| DiscoveryError::UnknownAlgorithm(s.to_string()))
    }
}

/// How discovery episodes pick their start state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StartDistribution {
    /// Always the environment's start state.
    Canonical,
    /// The previous episode's final state, reset to the start state with
    /// probability `reset_prob` (and on the first episode).
    Chain { reset_prob: f64 },
    /// Uniform over every observable state.
    Uniform,
    /// The start state with probability `canonical_prob`, otherwise uniform.
    Mixture { canonical_prob: f64 },
}

/// Whether the terminal reward reads the discriminator before or after it
/// absorbs the current episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VicUpdateOrder {
    RewardFirst,
    DiscriminatorFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub episodes: u64,
    pub learner: LearnerParams,
    pub ewma_weight: f64,
    pub phi_learning_rate: f64,
    pub lambda: f64,
    pub beta: f64,
    /// `1.0` orients focused LSD as final-minus-initial, `-1.0` flips it.
    pub lsd_sign: f64,
    pub max_steps: usize,
    pub start: StartDistribution,
    pub vic_order: VicUpdateOrder,
    /// Decay each skill's exploration by its own episode count instead of the global one.
    pub epsilon_per_skill: bool,
}

impl DiscoveryConfig {
    pub fn defaults(kind: EnvKind, algorithm: Algorithm) -> Self {
        Self {
            episodes: 20_000,
            learner: LearnerParams::default(),
            ewma_weight: algorithm.default_ewma_weight(kind),
            phi_learning_rate: 0.1,
            lambda: algorithm.default_lambda(),
            beta: 0.1,
            lsd_sign: 1.0,
            max_steps: max_steps(kind),
            start: StartDistribution::Chain { reset_prob: 0.5 },
            vic_order: VicUpdateOrder::RewardFirst,
            epsilon_per_skill: false,
        }
    }

    pub fn validate(&self) -> Result<(), DiscoveryError> {
        let bad = |m: &str| Err(DiscoveryError::InvalidConfig(m.to_string()));
        if !(self.ewma_weight > 0.0 && self.ewma_weight <= 1.0) {
            return bad("ewma_weight must lie in (0, 1]");
        }
        if !(self.phi_learning_rate > 0.0) {
            return bad("phi_learning_rate must be positive");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be nonnegative");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be nonnegative");
        }
        if self.lsd_sign != 1.0 && self.lsd_sign != -1.0 {
            return bad("lsd_sign must be 1 or -1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        match self.start {
            StartDistribution::Chain { reset_prob } if !(0.0..=1.0).contains(&reset_prob) => {
                return bad("reset_prob must lie in [0, 1]");
            }
            StartDistribution::Mixture { canonical_prob } if !(0.0..=1.0).contains(&canonical_prob) => {
                return bad("canonical_prob must lie in [0, 1]");
            }
            _ => {}
        }
        Ok(())
    }
}

/// Everything a skill reward reads: discriminators, representations and penalty weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardModel {
    pub algorithm: Algorithm,
    /// Full-state discriminator of the baseline VIC/DIAYN rewards.
    pub global: Option<EwmaDiscriminator>,
    /// Per-variable discriminators, `None` for untargeted variables.
    pub per_target: Vec<Option<EwmaDiscriminator>>,
    /// DUSDi discriminators predicting the skill from every variable but the target.
    pub penalty: Vec<Option<EwmaDiscriminator>>,
    /// Full-state representation of baseline LSD.
    pub phi: Option<LinearPhi>,
    /// Per-variable representations of focused LSD.
    pub per_target_phi: Vec<Option<LinearPhi>>,
    pub weights: PenaltyWeights,
    pub beta: f64,
    pub lsd_sign: f64,
}

impl RewardModel {
    pub fn new(env: &Env, algorithm: Algorithm, specs: &[SkillSpec], cfg: &DiscoveryConfig) -> Self {
        let n = env.num_vars();
        let z_count = specs.len();
        let support_of = |i: usize| -> Vec<usize> { specs.iter().filter(|s| s.targets_var(i)).map(|s| s.id).collect() };
        let per_var_disc = |w: f64| -> Vec<Option<EwmaDiscriminator>> {
            (0..n)
                .map(|i| {
                    let support = support_of(i);
                    (!support.is_empty()).then(|| EwmaDiscriminator::new(support, w))
                })
                .collect()
        };
        let family = algorithm.family();
        let global = (algorithm.is_baseline() && family != Family::Lsd)
            .then(|| EwmaDiscriminator::new((0..z_count).collect(), cfg.ewma_weight));
        let per_target = if !algorithm.is_baseline() && family != Family::Lsd {
            per_var_disc(cfg.ewma_weight)
        } else {
            vec![None; n]
        };
        let penalty = if algorithm.is_dusdi() { per_var_disc(cfg.ewma_weight) } else { vec![None; n] };
        let phi = (algorithm == Algorithm::Lsd).then(|| LinearPhi::zeros(z_count, state_feature_dim(env), cfg.phi_learning_rate));
        let per_target_phi = (0..n)
            .map(|i| {
                (algorithm == Algorithm::FocusedLsd && !support_of(i).is_empty())
                    .then(|| LinearPhi::zeros(z_count, env.domain(i), cfg.phi_learning_rate))
            })
            .collect();
        let lambda = if algorithm.is_focused() { cfg.lambda } else { 0.0 };
        Self {
            algorithm,
            global,
            per_target,
            penalty,
            phi,
            per_target_phi,
            weights: PenaltyWeights::new(env, lambda),
            beta: cfg.beta,
            lsd_sign: cfg.lsd_sign,
        }
    }

    fn nu(&self) -> f64 {
        1.0 / self.global.as_ref().map_or(1, |d| d.support().len()) as f64
    }

    fn penalty_of(&self, s0: &FactoredState, st: &FactoredState, spec: &SkillSpec) -> f64 {
        if self.algorithm.is_focused() && self.weights.lambda > 0.0 {
            side_effects_penalty(s0, st, &spec.targets, &self.weights)
        } else {
            0.0
        }
    }

    fn require_targets(spec: &SkillSpec) -> Result<(), DiscoveryError> {
        if spec.targets.is_empty() {
            Err(DiscoveryError::EmptyTargets(spec.id))
        } else {
            Ok(())
        }
    }

    /// Reward for a completed rollout from `s0` to `st` (VIC and LSD families).
    pub fn terminal_reward(&self, env: &Env, spec: &SkillSpec, s0: &FactoredState, st: &FactoredState) -> Result<f64, DiscoveryError> {
        let z = spec.id;
        match self.algorithm {
            Algorithm::Vic => {
                let d = self.global.as_ref().expect("baseline discriminator");
                Ok(log_ratio(d, pair_key(env, s0, st), z, self.nu()))
            }
            Algorithm::FocusedVic => {
                Self::require_targets(spec)?;
                let terms = spec.targets.iter().map(|&i| (self.target_disc(i), variable_pair_key(env, s0, st, i)));
                Ok(focused_mi_reward(terms, z, self.penalty_of(s0, st, spec)))
            }
            Algorithm::DusdiVic => {
                Self::require_targets(spec)?;
                let terms = spec.targets.iter().map(|&i| {
                    (self.target_disc(i), variable_pair_key(env, s0, st, i), self.penalty_disc(i), others_pair_key(env, s0, st, i))
                });
                Ok(dusdi_reward(terms, z, self.beta))
            }
            Algorithm::Lsd => {
                let phi = self.phi.as_ref().expect("baseline representation");
                Ok(lsd_reward(phi, &state_features(env, s0), z, &state_features(env, st)))
            }
            Algorithm::FocusedLsd => {
                Self::require_targets(spec)?;
                let feats: Vec<(Vec<usize>, Vec<usize>)> =
                    spec.targets.iter().map(|&i| (variable_feature(env, s0, i), variable_feature(env, st, i))).collect();
                let terms = spec.targets.iter().zip(&feats).map(|(&i, (f0, ft))| {
                    (self.per_target_phi[i].as_ref().expect("target representation"), &f0[..], &ft[..])
                });
                Ok(focused_lsd_reward(terms, z, self.penalty_of(s0, st, spec), self.lsd_sign))
            }
            _ => Err(DiscoveryError::InvalidConfig(format!("{} has no terminal reward", self.algorithm))),
        }
    }

    /// Reward for reaching `st` mid-rollout (DIAYN family).
    pub fn step_reward(&self, env: &Env, spec: &SkillSpec, s0: &FactoredState, st: &FactoredState) -> Result<f64, DiscoveryError> {
        let z = spec.id;
        match self.algorithm {
            Algorithm::Diayn => {
                let d = self.global.as_ref().expect("baseline discriminator");
                Ok(log_ratio(d, env.state_key(st), z, self.nu()))
            }
            Algorithm::FocusedDiayn => {
                Self::require_targets(spec)?;
                let terms = spec.targets.iter().map(|&i| (self.target_disc(i), env.variable_key(st, i)));
                Ok(focused_mi_reward(terms, z, self.penalty_of(s0, st, spec)))
            }
            Algorithm::DusdiDiayn => {
                Self::require_targets(spec)?;
                let terms = spec.targets.iter().map(|&i| {
                    (self.target_disc(i), env.variable_key(st, i), self.penalty_disc(i), others_key(env, st, i))
                });
                Ok(dusdi_reward(terms, z, self.beta))
            }
            _ => Err(DiscoveryError::InvalidConfig(format!("{} has no per-step reward", self.algorithm))),
        }
    }

    /// Absorbs a completed rollout into the discriminators (VIC family).
    pub fn observe_terminal(&mut self, env: &Env, spec: &SkillSpec, s0: &FactoredState, st: &FactoredState) -> Result<(), DiscoveryError> {
        let z = spec.id;
        if let Some(d) = self.global.as_mut() {
            d.update(pair_key(env, s0, st), z)?;
        }
        for &i in &spec.targets {
            if let Some(d) = self.per_target[i].as_mut() {
                d.update(variable_pair_key(env, s0, st, i), z)?;
            }
            if let Some(d) = self.penalty[i].as_mut() {
                d.update(others_pair_key(env, s0, st, i), z)?;
            }
        }
        Ok(())
    }

    /// Absorbs one visited state into the discriminators (DIAYN family).
    pub fn observe_step(&mut self, env: &Env, spec: &SkillSpec, st: &FactoredState) -> Result<(), DiscoveryError> {
        let z = spec.id;
        if let Some(d) = self.global.as_mut() {
            d.update(env.state_key(st), z)?;
        }
        for &i in &spec.targets {
            if let Some(d) = self.per_target[i].as_mut() {
                d.update(env.variable_key(st, i), z)?;
            }
            if let Some(d) = self.penalty[i].as_mut() {
                d.update(others_key(env, st, i), z)?;
            }
        }
        Ok(())
    }

    /// One representation step from a completed rollout (LSD family).
    pub fn update_phi(&mut self, env: &Env, spec: &SkillSpec, s0: &FactoredState, st: &FactoredState) -> Result<(), DiscoveryError> {
        let z = spec.id;
        if let Some(phi) = self.phi.as_mut() {
            phi.update(&state_features(env, s0), &state_features(env, st), z)?;
        }
        for &i in &spec.targets {
            if let Some(phi) = self.per_target_phi[i].as_mut() {
                let (f0, ft) = (variable_feature(env, s0, i), variable_feature(env, st, i));
                if self.lsd_sign > 0.0 {
                    phi.update(&f0, &ft, z)?;
                } else {
                    phi.update(&ft, &f0, z)?;
                }
            }
        }
        Ok(())
    }

    fn target_disc(&self, i: usize) -> &EwmaDiscriminator {
        self.per_target[i].as_ref().expect("discriminator for targeted variable")
    }

    fn penalty_disc(&self, i: usize) -> &EwmaDiscriminator {
        self.penalty[i].as_ref().expect("penalty discriminator for targeted variable")
    }
}

/// Key of an `(s0, sT)` pair of full states.
pub fn pair_key(env: &Env, s0: &FactoredState, st: &FactoredState) -> StateKey {
    StateKey(env.state_key(s0).0 * env.state_count() + env.state_key(st).0)
}

/// Key of an `(s0^i, sT^i)` pair.
pub fn variable_pair_key(env: &Env, s0: &FactoredState, st: &FactoredState, i: usize) -> StateKey {
    StateKey(env.value_index(s0, i) * env.domain(i) as u64 + env.value_index(st, i))
}

fn others(env: &Env, i: usize) -> Vec<usize> {
    (0..env.num_vars()).filter(|&j| j != i).collect()
}

/// Key of every variable except `i`.
pub fn others_key(env: &Env, st: &FactoredState, i: usize) -> StateKey {
    env.variables_key(st, &others(env, i))
}

/// Key of an `(s0^{-i}, sT^{-i})` pair.
pub fn others_pair_key(env: &Env, s0: &FactoredState, st: &FactoredState, i: usize) -> StateKey {
    let rest = others(env, i);
    StateKey(env.variables_key(s0, &rest).0 * env.subset_size(&rest) + env.variables_key(st, &rest).0)
}

/// Trained skills together with the reward model that shaped them.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscoveryOutcome {
    pub skills: SkillSet,
    pub model: RewardModel,
    pub trace: Vec<EpisodeTrace>,
}

/// Summary of one discovery episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub skill: usize,
    pub start: StateKey,
    pub end: StateKey,
    pub steps: usize,
    /// Intrinsic return.
    pub ret: f64,
}

fn sample_start<R: Rng + ?Sized>(env: &Env, start: StartDistribution, previous: Option<&EnvState>, rng: &mut R) -> EnvState {
    match start {
        StartDistribution::Canonical => env.initial_state(),
        StartDistribution::Chain { reset_prob } => match previous {
            Some(prev) if rng.random::<f64>() >= reset_prob => prev.clone(),
            _ => env.initial_state(),
        },
        StartDistribution::Uniform => {
            let key = rng.random_range(0..env.state_count());
            env.complete(env.state_from_key(StateKey(key)))
        }
        StartDistribution::Mixture { canonical_prob } => {
            if rng.random::<f64>() < canonical_prob {
                env.initial_state()
            } else {
                sample_start(env, StartDistribution::Uniform, previous, rng)
            }
        }
    }
}

/// Runs `cfg.episodes` discovery episodes of `algorithm` on `env`.
pub fn train_skills<R: Rng + ?Sized>(
    env: &Env,
    algorithm: Algorithm,
    cfg: &DiscoveryConfig,
    rng: &mut R,
) -> Result<DiscoveryOutcome, DiscoveryError> {
    cfg.validate()?;
    let specs = algorithm.skill_specs(env.kind());
    let mut model = RewardModel::new(env, algorithm, &specs, cfg);
    let mut skills = SkillSet::new(specs, cfg.max_steps);
    let mut trace = Vec::with_capacity(cfg.episodes as usize);
    let params = cfg.learner;
    let mut previous: Option<EnvState> = None;
    let mut per_skill = vec![0u64; skills.len()];
    for episode in 0..cfg.episodes {
        let s0 = sample_start(env, cfg.start, previous.as_ref(), rng);
        let z = skills.sample_skill(rng);
        let count = if cfg.epsilon_per_skill { per_skill[z] } else { episode };
        per_skill[z] += 1;
        let epsilon = epsilon_schedule(params.epsilon0, params.kappa, count);
        let spec = skills.specs[z].clone();
        let (final_state, steps, ret) = match algorithm.family() {
            Family::Diayn => diayn_episode(env, &mut skills, &mut model, &spec, &s0, epsilon, &params, rng)?,
            Family::Vic | Family::Lsd => {
                let history = execute_skill(env, &skills, z, &s0, epsilon, rng);
                let (first, last) = (&history.first().obs, &history.last().obs);
                let reward = match algorithm.family() {
                    Family::Lsd => {
                        model.update_phi(env, &spec, first, last)?;
                        model.terminal_reward(env, &spec, first, last)?
                    }
                    _ => match cfg.vic_order {
                        VicUpdateOrder::RewardFirst => {
                            let r = model.terminal_reward(env, &spec, first, last)?;
                            model.observe_terminal(env, &spec, first, last)?;
                            r
                        }
                        VicUpdateOrder::DiscriminatorFirst => {
                            model.observe_terminal(env, &spec, first, last)?;
                            model.terminal_reward(env, &spec, first, last)?
                        }
                    },
                };
                let policy = &mut skills.policies[z];
                let t = history.len();
                for k in (0..t).rev() {
                    let key = env.state_key(&history.states[k].obs);
                    let next = env.state_key(&history.states[k + 1].obs);
                    let r = if k + 1 == t { reward } else { 0.0 };
                    q_update(policy, key, history.actions[k].index(), r, next, k + 1 == t, &params);
                }
                (history.last().clone(), t, reward)
            }
        };
        trace.push(EpisodeTrace {
            skill: z,
            start: env.state_key(&s0.obs),
            end: env.state_key(&final_state.obs),
            steps,
            ret,
        });
        previous = Some(final_state);
    }
    Ok(DiscoveryOutcome { skills, model, trace })
}

#[allow(clippy::too_many_arguments)]
fn diayn_episode<R: Rng + ?Sized>(
    env: &Env,
    skills: &mut SkillSet,
    model: &mut RewardModel,
    spec: &SkillSpec,
    s0: &EnvState,
    epsilon: f64,
    params: &LearnerParams,
    rng: &mut R,
) -> Result<(EnvState, usize, f64), DiscoveryError> {
    let z = spec.id;
    let cap = skills.max_steps;
    let mut current = s0.clone();
    let mut total = 0.0;
    let mut steps = 0;
    for t in 0..cap {
        let key = env.state_key(&current.obs);
        let action = Action::ALL[epsilon_greedy_action(&skills.policies[z], key, epsilon, rng)];
        let next = env.transition(&current, action, rng);
        let reward = model.step_reward(env, spec, &s0.obs, &next.obs)?;
        let terminal = action == Action::Terminate || t + 1 == cap;
        q_update(&mut skills.policies[z], key, action.index(), reward, env.state_key(&next.obs), terminal, params);
        model.observe_step(env, spec, &next.obs)?;
        total += reward;
        steps += 1;
        current = next;
        if terminal {
            break;
        }
    }
    Ok((current, steps, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_fourrooms, make_mudworld};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
        assert!("metra".parse::<Algorithm>().is_err());
    }

    #[test]
    fn zero_episodes_leave_everything_untrained() {
        let env = make_fourrooms();
        for a in Algorithm::ALL {
            let mut cfg = DiscoveryConfig::defaults(env.kind(), a);
            cfg.episodes = 0;
            let out = train_skills(&env, a, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            assert!(out.skills.policies.iter().all(|q| q.is_empty()));
            assert!(out.model.global.iter().chain(out.model.per_target.iter().flatten()).all(|d| d.is_empty()));
            assert!(out.model.phi.iter().all(|p| p.matrix.iter().all(|x| *x == 0.0)));
        }
    }

    #[test]
    fn defaults_follow_algorithm_and_environment() {
        let c = DiscoveryConfig::defaults(EnvKind::ForageWorld, Algorithm::FocusedVic);
        assert_eq!((c.ewma_weight, c.lambda, c.max_steps), (0.5, 10.0, 20));
        let c = DiscoveryConfig::defaults(EnvKind::FourRooms, Algorithm::FocusedLsd);
        assert_eq!((c.lambda, c.phi_learning_rate, c.max_steps), (2.0, 0.1, 40));
        let c = DiscoveryConfig::defaults(EnvKind::MudWorld, Algorithm::DusdiDiayn);
        assert_eq!((c.ewma_weight, c.beta), (0.05, 0.1));
    }

    #[test]
    fn zero_lambda_removes_penalty() {
        let env = make_mudworld();
        let mut cfg = DiscoveryConfig::defaults(env.kind(), Algorithm::FocusedVic);
        cfg.lambda = 0.0;
        let specs = Algorithm::FocusedVic.skill_specs(env.kind());
        let model = RewardModel::new(&env, Algorithm::FocusedVic, &specs, &cfg);
        let s0 = env.initial_state().obs;
        let mut st = s0.clone();
        st.set(crate::env::vars::mudworld::MUD_COUNT, 7);
        st.set(crate::env::vars::mudworld::MUDDY, 1);
        assert_eq!(model.terminal_reward(&env, &specs[0], &s0, &st).unwrap(), 0.0);
    }

    #[test]
    fn training_is_deterministic() {
        let env = make_mudworld();
        for a in [Algorithm::FocusedVic, Algorithm::FocusedDiayn, Algorithm::FocusedLsd, Algorithm::DusdiVic] {
            let mut cfg = DiscoveryConfig::defaults(env.kind(), a);
            cfg.episodes = 300;
            let x = train_skills(&env, a, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            let y = train_skills(&env, a, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            assert_eq!(x, y);
            assert_eq!(x.trace.len(), 300);
        }
    }
}
