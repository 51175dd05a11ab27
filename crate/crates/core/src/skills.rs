//! Skill identities, target assignments and skill execution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{vars, Action, Env, EnvKind, EnvState, VarValue};
use crate::learner::{epsilon_greedy_action, QTable};

/// Size of every skill set.
pub const NUM_SKILLS: usize = 16;

/// Per-skill step cap for an environment.
pub fn max_steps(kind: EnvKind) -> usize {
    match kind {
        EnvKind::FourRooms => 40,
        EnvKind::ForageWorld | EnvKind::MudWorld => 20,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub id: usize,
    /// Target variables; empty for unfocused skills.
    pub targets: Vec<usize>,
    /// Distinguishes skills that share a target, counted from 1.
    pub component: u32,
}

impl SkillSpec {
    pub fn is_focused(&self) -> bool {
        !self.targets.is_empty()
    }

    pub fn targets_var(&self, i: usize) -> bool {
        self.targets.contains(&i)
    }

    pub fn onehot(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[self.id] = 1.0;
        v
    }
}

/// Two skills per object variable, the remainder on the agent position.
pub fn default_skill_assignment(kind: EnvKind) -> Vec<SkillSpec> {
    let objects: Vec<usize> = match kind {
        EnvKind::FourRooms => vars::fourrooms::TOOLS.to_vec(),
        EnvKind::ForageWorld => vec![vars::forageworld::RESOURCE_A, vars::forageworld::RESOURCE_B],
        EnvKind::MudWorld => vec![vars::mudworld::TREASURE],
    };
    let mut specs = Vec::with_capacity(NUM_SKILLS);
    for &var in &objects {
        for component in 1..=2 {
            specs.push(SkillSpec { id: specs.len(), targets: vec![var], component });
        }
    }
    let mut component = 1;
    while specs.len() < NUM_SKILLS {
        specs.push(SkillSpec { id: specs.len(), targets: vec![vars::POSITION], component });
        component += 1;
    }
    specs
}

/// Sixteen unfocused skills.
pub fn baseline_skill_assignment() -> Vec<SkillSpec> {
    (0..NUM_SKILLS)
        .map(|id| SkillSpec { id, targets: Vec::new(), component: id as u32 + 1 })
        .collect()
}

/// Skills that share target variable `var`.
pub fn skills_targeting(specs: &[SkillSpec], var: usize) -> Vec<usize> {
    specs.iter().filter(|s| s.targets_var(var)).map(|s| s.id).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkillSet {
    pub specs: Vec<SkillSpec>,
    pub policies: Vec<QTable>,
    pub max_steps: usize,
}

impl SkillSet {
    pub fn new(specs: Vec<SkillSpec>, max_steps: usize) -> Self {
        let policies = specs.iter().map(|_| QTable::new(Action::COUNT)).collect();
        Self { specs, policies, max_steps }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// The skill prior: uniform and fixed.
    pub fn prior(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }

    pub fn sample_skill<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub states: Vec<EnvState>,
    pub actions: Vec<Action>,
    pub terminated_early: bool,
}

impl History {
    pub fn first(&self) -> &EnvState {
        &self.states[0]
    }

    pub fn last(&self) -> &EnvState {
        self.states.last().expect("history has a first state")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// A history restricted to one variable: same actions, one value per state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedHistory {
    pub values: Vec<VarValue>,
    pub actions: Vec<Action>,
}

pub fn project_history(history: &History, i: usize) -> ProjectedHistory {
    ProjectedHistory {
        values: history.states.iter().map(|s| s.obs.value(i)).collect(),
        actions: history.actions.clone(),
    }
}

/// Rolls out skill `id` from `s0` until it selects terminate or hits its step cap.
pub fn execute_skill<R: Rng + ?Sized>(
    env: &Env,
    skills: &SkillSet,
    id: usize,
    s0: &EnvState,
    epsilon: f64,
    rng: &mut R,
) -> History {
    execute_skill_until(env, skills, id, s0, epsilon, skills.max_steps, rng, |_| false)
}

/// Like [`execute_skill`] with a tighter step cap and an early-stop predicate
/// checked after every primitive step.
#[allow(clippy::too_many_arguments)]
pub fn execute_skill_until<R, F>(
    env: &Env,
    skills: &SkillSet,
    id: usize,
    s0: &EnvState,
    epsilon: f64,
    cap: usize,
    rng: &mut R,
    mut stop: F,
) -> History
where
    R: Rng + ?Sized,
    F: FnMut(&EnvState) -> bool,
{
    let cap = cap.min(skills.max_steps);
    let policy = &skills.policies[id];
    let mut states = Vec::with_capacity(cap + 1);
    let mut actions = Vec::with_capacity(cap);
    states.push(s0.clone());
    let mut terminated_early = false;
    while actions.len() < cap {
        let current = states.last().expect("non-empty");
        let key = env.state_key(&current.obs);
        let action = Action::ALL[epsilon_greedy_action(policy, key, epsilon, rng)];
        let next = env.transition(current, action, rng);
        actions.push(action);
        states.push(next);
        if action == Action::Terminate {
            terminated_early = true;
            break;
        }
        if stop(states.last().expect("non-empty")) {
            break;
        }
    }
    History { states, actions, terminated_early }
}
