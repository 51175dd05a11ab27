use serde::{Deserialize, Serialize};

use crate::env::{Env, FactoredState, VarValue};

/// Per-variable penalty weights `lambda / diameter_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub lambda: f64,
    pub per_var: Vec<f64>,
}

impl PenaltyWeights {
    pub fn new(env: &Env, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "penalty strength must be nonnegative");
        let per_var = env
            .schemas()
            .iter()
            .map(|s| if s.diameter > 0.0 { lambda / s.diameter } else { 0.0 })
            .collect();
        Self { lambda, per_var }
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.per_var[j]
    }
}

/// Squared 2-norm of the change in variable `j`; positions differ as 2D coordinates.
pub fn variable_delta_sq(s0: &FactoredState, st: &FactoredState, j: usize) -> f64 {
    match (s0.value(j), st.value(j)) {
        (VarValue::Pos(a), VarValue::Pos(b)) => {
            let d = a.distance(b);
            d * d
        }
        (VarValue::Int(a), VarValue::Int(b)) => {
            let d = a as f64 - b as f64;
            d * d
        }
        _ => unreachable!("variable kinds agree across states of one environment"),
    }
}

/// `sqrt(sum_{j not in targets} lambda_j^2 |s0^j - st^j|^2)`.
pub fn side_effects_penalty(s0: &FactoredState, st: &FactoredState, targets: &[usize], weights: &PenaltyWeights) -> f64 {
    let mut total = 0.0;
    for j in 0..s0.len() {
        if targets.contains(&j) {
            continue;
        }
        let w = weights.weight(j);
        if w == 0.0 {
            continue;
        }
        total += w * w * variable_delta_sq(s0, st, j);
    }
    total.sqrt()
}

/// Number of non-target variables whose value differs between `s0` and `st`.
pub fn side_effect_count(s0: &FactoredState, st: &FactoredState, targets: &[usize]) -> usize {
    (0..s0.len()).filter(|j| !targets.contains(j) && s0.value(*j) != st.value(*j)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_forageworld, make_mudworld, vars, Pos};

    #[test]
    fn unchanged_state_has_zero_penalty() {
        let env = make_forageworld();
        let w = PenaltyWeights::new(&env, 10.0);
        let s = env.initial_state().obs;
        assert_eq!(side_effects_penalty(&s, &s, &[1], &w), 0.0);
    }

    #[test]
    fn single_flag_flip() {
        let env = make_forageworld();
        let w = PenaltyWeights::new(&env, 10.0);
        let s0 = env.initial_state().obs;
        let mut st = s0.clone();
        st.set(vars::forageworld::PLANTS[0], 1);
        assert!((side_effects_penalty(&s0, &st, &[1], &w) - 10.0).abs() < 1e-12);
        assert_eq!(side_effect_count(&s0, &st, &[1]), 1);
    }

    #[test]
    fn flag_and_count_combine_in_quadrature() {
        let env = make_forageworld();
        let w = PenaltyWeights::new(&env, 10.0);
        let s0 = env.initial_state().obs;
        let mut st = s0.clone();
        st.set(vars::forageworld::PLANTS[1], 1);
        st.set(vars::forageworld::RESOURCE_B, 2);
        let p = side_effects_penalty(&s0, &st, &[vars::forageworld::RESOURCE_A], &w);
        assert!((p - 125f64.sqrt()).abs() < 1e-12);
        assert!((p - 11.1803).abs() < 1e-4);
    }

    #[test]
    fn target_changes_are_free() {
        let env = make_mudworld();
        let w = PenaltyWeights::new(&env, 10.0);
        let s0 = env.initial_state().obs;
        let mut st = s0.clone();
        st.pos = Pos::new(5, 5);
        assert_eq!(side_effects_penalty(&s0, &st, &[0], &w), 0.0);
        let expected = 10.0 / env.schemas()[0].diameter * Pos::new(1, 1).distance(Pos::new(5, 5));
        assert!((side_effects_penalty(&s0, &st, &[2], &w) - expected).abs() < 1e-12);
    }

    #[test]
    fn weights_are_bounded_by_lambda() {
        let env = make_mudworld();
        let w = PenaltyWeights::new(&env, 10.0);
        assert!(w.per_var.iter().all(|x| (0.0..=10.0).contains(x)));
        assert_eq!(w.weight(vars::mudworld::MUD_COUNT), 0.5);
    }
}
