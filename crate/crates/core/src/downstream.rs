//! Downstream tasks solved by SMDP Q-learning over a frozen skill set.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::Algorithm;
use crate::env::{vars, Env, EnvKind, FactoredState};
use crate::learner::{epsilon_greedy_action, epsilon_schedule, smdp_q_update, LearnerError, LearnerParams, QTable};
use crate::rng::stream;
use crate::skills::{execute_skill_until, SkillSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("{0} has no proxy task")]
    NoProxy(EnvKind),
    #[error("task is defined for {task} but the environment is {env}")]
    EnvMismatch { task: EnvKind, env: EnvKind },
    #[error("unknown reward mode '{0}'")]
    UnknownMode(String),
    #[error("skill set has {0} skills, expected at least one")]
    NoSkills(usize),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    True,
    Proxy,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::True => "true",
            RewardMode::Proxy => "proxy",
        })
    }
}

impl FromStr for RewardMode {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => Ok(RewardMode::True),
            "proxy" => Ok(RewardMode::Proxy),
            other => Err(TaskError::UnknownMode(other.to_string())),
        }
    }
}

/// Primitive-step budget of a downstream episode.
pub fn step_budget(kind: EnvKind) -> usize {
    match kind {
        EnvKind::FourRooms => 320,
        EnvKind::ForageWorld | EnvKind::MudWorld => 60,
    }
}

/// Skill-selection exploration decay for skills discovered by `algorithm`.
pub fn selection_decay(kind: EnvKind, algorithm: Algorithm) -> f64 {
    if kind == EnvKind::ForageWorld && !algorithm.is_focused() {
        0.0005
    } else {
        0.001
    }
}

fn at_goal(env: &Env, s: &FactoredState) -> bool {
    s.pos == env.goal()
}

/// The intended task: collect everything without collateral damage, then reach the goal.
pub fn true_task_success(env: &Env, s: &FactoredState) -> bool {
    if !at_goal(env, s) {
        return false;
    }
    match env.kind() {
        EnvKind::FourRooms => vars::fourrooms::TOOLS.iter().all(|&i| s.get(i) == 1),
        EnvKind::ForageWorld => {
            use vars::forageworld::*;
            s.get(RESOURCE_A) >= 2 && s.get(RESOURCE_B) >= 2 && PLANTS.iter().all(|&i| s.get(i) == 0)
        }
        EnvKind::MudWorld => {
            use vars::mudworld::*;
            s.get(TREASURE) == 1 && s.get(MUDDY) == 0 && s.get(MUD_COUNT) < 5
        }
    }
}

/// The misspecified task that ignores collateral damage.
pub fn proxy_task_success(env: &Env, s: &FactoredState) -> Result<bool, TaskError> {
    if env.kind() == EnvKind::FourRooms {
        return Err(TaskError::NoProxy(EnvKind::FourRooms));
    }
    if !at_goal(env, s) {
        return Ok(false);
    }
    match env.kind() {
        EnvKind::FourRooms => Err(TaskError::NoProxy(EnvKind::FourRooms)),
        EnvKind::ForageWorld => {
            use vars::forageworld::*;
            Ok(s.get(RESOURCE_A) >= 2 && s.get(RESOURCE_B) >= 2)
        }
        EnvKind::MudWorld => {
            use vars::mudworld::*;
            Ok(s.get(TREASURE) == 1 && s.get(MUDDY) == 0)
        }
    }
}

/// Collateral damage visible in a state: destroyed plants or tracked mud cells.
pub fn collateral_damage(env: &Env, s: &FactoredState) -> u32 {
    match env.kind() {
        EnvKind::FourRooms => 0,
        EnvKind::ForageWorld => vars::forageworld::PLANTS.iter().map(|&i| s.get(i) as u32).sum(),
        EnvKind::MudWorld => s.get(vars::mudworld::MUD_COUNT) as u32,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub env: EnvKind,
    pub mode: RewardMode,
    pub budget: usize,
    pub episodes: u64,
    /// Exploration decay of the skill-selection policy.
    pub decay: f64,
}

impl TaskSpec {
    pub fn new(env: EnvKind, mode: RewardMode, algorithm: Algorithm) -> Result<Self, TaskError> {
        if env == EnvKind::FourRooms && mode == RewardMode::Proxy {
            return Err(TaskError::NoProxy(env));
        }
        Ok(Self { env, mode, budget: step_budget(env), episodes: 5_000, decay: selection_decay(env, algorithm) })
    }

    /// Whether `s` earns the training reward.
    pub fn rewarded(&self, env: &Env, s: &FactoredState) -> bool {
        match self.mode {
            RewardMode::True => true_task_success(env, s),
            RewardMode::Proxy => proxy_task_success(env, s).unwrap_or(false),
        }
    }
}

/// One downstream training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u32,
    pub episode: u64,
    /// Undiscounted training return (0 or 1).
    pub ret: f64,
    pub true_success: bool,
    pub epsilon: f64,
    /// Collateral damage at the end of the episode.
    pub side_effects: u32,
    pub steps: u32,
    pub skills_used: u32,
}

/// Learning curve and final selection policy of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run: u32,
    pub records: Vec<RunRecord>,
    pub policy: QTable,
}

impl RunResult {
    /// Mean of `f` over the last `window` episodes.
    pub fn tail_mean(&self, window: usize, f: impl Fn(&RunRecord) -> f64) -> f64 {
        tail_mean(&self.records, window, f)
    }
}

pub fn tail_mean(records: &[RunRecord], window: usize, f: impl Fn(&RunRecord) -> f64) -> f64 {
    let n = records.len().min(window.max(1));
    if n == 0 {
        return 0.0;
    }
    records[records.len() - n..].iter().map(f).sum::<f64>() / n as f64
}

/// Mean over runs of each run's tail mean.
pub fn end_of_training<F: Fn(&RunRecord) -> f64 + Copy>(runs: &[RunResult], window: usize, f: F) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    runs.iter().map(|r| r.tail_mean(window, f)).sum::<f64>() / runs.len() as f64
}

/// One run of episodic SMDP Q-learning over `skills`.
pub fn train_selection_run<R: Rng + ?Sized>(
    env: &Env,
    skills: &SkillSet,
    task: &TaskSpec,
    params: &LearnerParams,
    run: u32,
    rng: &mut R,
) -> Result<RunResult, TaskError> {
    if task.env != env.kind() {
        return Err(TaskError::EnvMismatch { task: task.env, env: env.kind() });
    }
    if skills.is_empty() {
        return Err(TaskError::NoSkills(0));
    }
    let mut q = QTable::new(skills.len());
    let mut records = Vec::with_capacity(task.episodes as usize);
    for episode in 0..task.episodes {
        let epsilon = epsilon_schedule(params.epsilon0, task.decay, episode);
        let mut state = env.initial_state();
        let mut steps = 0usize;
        let mut used = 0u32;
        let mut rewarded = false;
        while steps < task.budget && !rewarded {
            let key = env.state_key(&state.obs);
            let z = epsilon_greedy_action(&q, key, epsilon, rng);
            let cap = (task.budget - steps).min(skills.max_steps);
            let history = execute_skill_until(env, skills, z, &state, 0.0, cap, rng, |s| task.rewarded(env, &s.obs));
            let duration = history.len();
            let next = history.last().clone();
            rewarded = task.rewarded(env, &next.obs);
            let discounted = if rewarded { params.gamma.powi(duration as i32 - 1) } else { 0.0 };
            let next_key = env.state_key(&next.obs);
            smdp_q_update(&mut q, key, z, discounted, duration as u32, next_key, rewarded, params)?;
            steps += duration;
            used += 1;
            state = next;
        }
        records.push(RunRecord {
            run,
            episode,
            ret: if rewarded { 1.0 } else { 0.0 },
            true_success: true_task_success(env, &state.obs),
            epsilon,
            side_effects: collateral_damage(env, &state.obs),
            steps: steps as u32,
            skills_used: used,
        });
    }
    Ok(RunResult { run, records, policy: q })
}

/// Independent runs in parallel, each on its own stream derived from `seed`.
pub fn train_skill_selection(
    env: &Env,
    skills: &SkillSet,
    task: &TaskSpec,
    params: &LearnerParams,
    runs: u32,
    seed: u64,
) -> Result<Vec<RunResult>, TaskError> {
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = stream(seed, "downstream", &[run as u64]);
            train_selection_run(env, skills, task, params, run, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_forageworld, make_fourrooms, make_mudworld, Action, Pos};
    use crate::skills::{default_skill_assignment, max_steps};

    fn at_goal_state(env: &Env, vars: &[u8]) -> FactoredState {
        FactoredState::new(env.goal(), vars)
    }

    #[test]
    fn true_task_examples() {
        let fr = make_fourrooms();
        assert!(!true_task_success(&fr, &fr.initial_state().obs));
        assert!(true_task_success(&fr, &at_goal_state(&fr, &[1, 1, 1, 1])));
        let fw = make_forageworld();
        assert!(true_task_success(&fw, &at_goal_state(&fw, &[2, 2, 0, 0, 0])));
        assert!(!true_task_success(&fw, &at_goal_state(&fw, &[2, 2, 0, 1, 0])));
        let mw = make_mudworld();
        assert!(!true_task_success(&mw, &at_goal_state(&mw, &[0, 1, 5])));
        assert!(true_task_success(&mw, &at_goal_state(&mw, &[0, 1, 4])));
    }

    #[test]
    fn proxy_task_examples() {
        let fw = make_forageworld();
        assert!(proxy_task_success(&fw, &at_goal_state(&fw, &[2, 2, 1, 1, 1])).unwrap());
        let mw = make_mudworld();
        assert!(proxy_task_success(&mw, &at_goal_state(&mw, &[0, 1, 15])).unwrap());
        assert!(!proxy_task_success(&mw, &at_goal_state(&mw, &[1, 1, 0])).unwrap());
        let fr = make_fourrooms();
        assert_eq!(proxy_task_success(&fr, &fr.initial_state().obs), Err(TaskError::NoProxy(EnvKind::FourRooms)));
        assert!(TaskSpec::new(EnvKind::FourRooms, RewardMode::Proxy, Algorithm::Vic).is_err());
    }

    #[test]
    fn proxy_relaxes_true_task() {
        for env in [make_forageworld(), make_mudworld()] {
            for s in env.enumerate_states() {
                if true_task_success(&env, &s) {
                    assert!(proxy_task_success(&env, &s).unwrap());
                }
            }
        }
    }

    #[test]
    fn budgets_and_decays() {
        assert_eq!(step_budget(EnvKind::FourRooms), 320);
        assert_eq!(step_budget(EnvKind::MudWorld), 60);
        assert!(step_budget(EnvKind::ForageWorld) / max_steps(EnvKind::ForageWorld) >= 3);
        assert_eq!(selection_decay(EnvKind::ForageWorld, Algorithm::DusdiVic), 0.0005);
        assert_eq!(selection_decay(EnvKind::ForageWorld, Algorithm::FocusedLsd), 0.001);
        assert_eq!(selection_decay(EnvKind::MudWorld, Algorithm::Vic), 0.001);
    }

    #[test]
    fn terminating_skills_never_succeed() {
        let env = make_mudworld();
        let mut skills = SkillSet::new(default_skill_assignment(env.kind()), 20);
        for s in env.enumerate_states() {
            let key = env.state_key(&s);
            for q in skills.policies.iter_mut() {
                q.set(key, Action::Terminate.index(), 1.0);
            }
        }
        let mut task = TaskSpec::new(env.kind(), RewardMode::True, Algorithm::FocusedVic).unwrap();
        task.episodes = 20;
        let runs = train_skill_selection(&env, &skills, &task, &LearnerParams::default(), 2, 0).unwrap();
        for r in &runs {
            assert!(r.records.iter().all(|x| x.ret == 0.0 && x.steps == 60 && x.skills_used == 60));
        }
    }

    #[test]
    fn budget_is_never_exceeded_and_reward_is_sparse() {
        let env = make_fourrooms();
        let skills = SkillSet::new(default_skill_assignment(env.kind()), 40);
        let mut task = TaskSpec::new(env.kind(), RewardMode::True, Algorithm::FocusedVic).unwrap();
        task.episodes = 30;
        let runs = train_skill_selection(&env, &skills, &task, &LearnerParams::default(), 3, 1).unwrap();
        assert_eq!(runs.len(), 3);
        for r in &runs {
            assert!(r.records.iter().all(|x| x.steps as usize <= 320 && x.ret <= 1.0));
        }
    }

    #[test]
    fn goal_reached_mid_skill_counts() {
        let env = make_mudworld();
        let mut skills = SkillSet::new(default_skill_assignment(env.kind()), 20);
        // Skill 0 walks right then down to the goal, never terminating on its own.
        for s in env.enumerate_states() {
            let a = if s.pos.col < env.goal().col { Action::Right } else { Action::Down };
            skills.policies[0].set(env.state_key(&s), a.index(), 1.0);
        }
        let mut start = env.initial_state();
        start.obs.set(vars::mudworld::TREASURE, 1);
        start.obs.pos = Pos::new(5, 5);
        let mut rng = crate::rng::stream(3, "t", &[]);
        let env0 = env.clone().with_slip(0.0);
        let h = execute_skill_until(&env0, &skills, 0, &start, 0.0, 20, &mut rng, |s| true_task_success(&env0, &s.obs));
        assert_eq!(h.last().obs.pos, env.goal());
        assert_eq!(h.len(), 10);
    }

    #[test]
    fn runs_are_reproducible() {
        let env = make_mudworld();
        let skills = SkillSet::new(default_skill_assignment(env.kind()), 20);
        let mut task = TaskSpec::new(env.kind(), RewardMode::True, Algorithm::FocusedVic).unwrap();
        task.episodes = 25;
        let a = train_skill_selection(&env, &skills, &task, &LearnerParams::default(), 4, 9).unwrap();
        let b = train_skill_selection(&env, &skills, &task, &LearnerParams::default(), 4, 9).unwrap();
        assert_eq!(a, b);
        let ids: Vec<u32> = a.iter().map(|r| r.run).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }
}
