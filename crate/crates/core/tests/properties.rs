use focused_skills::discovery::penalty::{side_effect_count, side_effects_penalty};
use focused_skills::discovery::rewards::{focused_vic_reward, support_log_ratio};
use focused_skills::discovery::phi::{state_feature_dim, state_features};
use focused_skills::env::vars::{fourrooms, forageworld, mudworld};
use focused_skills::evaluation::{coverage_auc, coverage_curve, CoverageMode};
use focused_skills::rng::stream;
use focused_skills::skills::{default_skill_assignment, execute_skill};
use focused_skills::{Action, EnvKind, EwmaDiscriminator, FactoredState, LinearPhi, PenaltyWeights, QTable, SkillSet, StateKey};
use proptest::prelude::*;

fn env_kind() -> impl Strategy<Value = EnvKind> {
    prop_oneof![Just(EnvKind::FourRooms), Just(EnvKind::ForageWorld), Just(EnvKind::MudWorld)]
}

fn permanent_vars(kind: EnvKind) -> Vec<usize> {
    match kind {
        EnvKind::FourRooms => fourrooms::TOOLS.to_vec(),
        EnvKind::ForageWorld => forageworld::PLANTS.to_vec(),
        EnvKind::MudWorld => vec![mudworld::TREASURE],
    }
}

/// A skill set whose Q-tables hold random values on every enumerated state.
fn random_skills(kind: EnvKind, seed: u64) -> SkillSet {
    use rand::Rng;
    let env = kind.build();
    let mut rng = stream(seed, "random-q", &[]);
    let mut set = SkillSet::new(default_skill_assignment(kind), 12);
    for q in &mut set.policies {
        *q = QTable::new(Action::COUNT);
        for s in env.enumerate_states().iter().step_by(7) {
            let key = env.state_key(s);
            for a in 0..Action::COUNT {
                q.set(key, a, rng.random::<f64>());
            }
        }
    }
    set
}

fn random_state(kind: EnvKind, cell: usize, raw: &[u8]) -> FactoredState {
    let env = kind.build();
    let pos = env.walkable()[cell % env.walkable().len()];
    let vars: Vec<u8> = (1..env.num_vars()).map(|i| raw[i - 1] % env.domain(i) as u8).collect();
    FactoredState::new(pos, &vars)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_keep_walls_permanence_and_mud_consistent(
        kind in env_kind(),
        actions in prop::collection::vec(0usize..Action::COUNT, 1..300),
        seed in any::<u64>(),
    ) {
        let env = kind.build();
        let mut rng = stream(seed, "trajectory", &[]);
        let mut s = env.initial_state();
        for a in actions {
            let next = env.transition(&s, Action::ALL[a], &mut rng);
            prop_assert!(env.walk_index(next.obs.pos).is_some());
            for v in permanent_vars(kind) {
                prop_assert!(next.obs.get(v) >= s.obs.get(v));
            }
            if kind == EnvKind::MudWorld {
                prop_assert_eq!(next.obs.get(mudworld::MUD_COUNT) as u32, next.mud.count_ones());
            }
            prop_assert!(env.validate(&next).is_ok());
            s = next;
        }
    }

    #[test]
    fn penalty_is_zero_exactly_when_non_targets_are_unchanged(
        kind in env_kind(),
        a in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        b in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        target_mask in 0u8..64,
        lambda in 0.01f64..50.0,
    ) {
        let env = kind.build();
        let s0 = random_state(kind, a.0, &a.1);
        let st = random_state(kind, b.0, &b.1);
        let targets: Vec<usize> = (0..env.num_vars()).filter(|i| target_mask >> i & 1 == 1).collect();
        let w = PenaltyWeights::new(&env, lambda);
        let p = side_effects_penalty(&s0, &st, &targets, &w);
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p == 0.0, side_effect_count(&s0, &st, &targets) == 0);
    }

    #[test]
    fn penalty_grows_with_the_changed_set(
        kind in env_kind(),
        base in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        other in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        small_mask in 0u8..64,
        extra_mask in 0u8..64,
    ) {
        let env = kind.build();
        let s0 = random_state(kind, base.0, &base.1);
        let diff = random_state(kind, other.0, &other.1);
        let blend = |mask: u8| {
            let mut s = s0.clone();
            if mask & 1 == 1 {
                s.pos = diff.pos;
            }
            for i in 1..env.num_vars() {
                if mask >> i & 1 == 1 {
                    s.set(i, diff.get(i));
                }
            }
            s
        };
        let w = PenaltyWeights::new(&env, 3.0);
        let smaller = side_effects_penalty(&s0, &blend(small_mask), &[], &w);
        let larger = side_effects_penalty(&s0, &blend(small_mask | extra_mask), &[], &w);
        prop_assert!(larger >= smaller);
    }

    #[test]
    fn lambda_zero_leaves_only_target_terms(
        kind in env_kind(),
        a in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        b in (0usize..200, prop::collection::vec(any::<u8>(), 5)),
        updates in prop::collection::vec((0u64..6, 0usize..2), 0..40),
        queries in prop::collection::vec(0u64..6, 1..3),
        z in 0usize..2,
    ) {
        let env = kind.build();
        let (s0, st) = (random_state(kind, a.0, &a.1), random_state(kind, b.0, &b.1));
        let mut d = EwmaDiscriminator::new(vec![0, 1], 0.3);
        for (k, s) in updates {
            d.update(StateKey(k), s).unwrap();
        }
        let penalty = side_effects_penalty(&s0, &st, &[1], &PenaltyWeights::new(&env, 0.0));
        let terms: Vec<_> = queries.iter().map(|&q| (&d, StateKey(q))).collect();
        let reward = focused_vic_reward(terms, z, penalty);
        let expected: f64 = queries.iter().map(|&q| support_log_ratio(&d, StateKey(q), z)).sum();
        prop_assert_eq!(reward, expected);
    }

    #[test]
    fn discriminator_rows_stay_normalised(
        weight in 0.001f64..=1.0,
        updates in prop::collection::vec((0u64..10, 0usize..5), 0..300),
    ) {
        let mut d = EwmaDiscriminator::new(vec![0, 2, 4, 6, 8], weight);
        for (k, s) in updates {
            d.update(StateKey(k), s * 2).unwrap();
        }
        for k in 0..10 {
            let p = d.predict(StateKey(k));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn normalised_phi_is_one_lipschitz_on_state_features(
        kind in env_kind(),
        seed in any::<u64>(),
        pairs in prop::collection::vec(((0usize..200, prop::collection::vec(any::<u8>(), 5)), (0usize..200, prop::collection::vec(any::<u8>(), 5))), 1..20),
    ) {
        use rand::Rng;
        let env = kind.build();
        let dim = state_feature_dim(&env);
        let mut rng = stream(seed, "phi", &[]);
        let m: Vec<f64> = (0..16 * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut phi = LinearPhi::from_matrix(16, dim, m, 0.1).unwrap();
        phi.spectral_normalize().unwrap();
        for ((c0, r0), (c1, r1)) in pairs {
            let (f0, f1) = (state_features(&env, &random_state(kind, c0, &r0)), state_features(&env, &random_state(kind, c1, &r1)));
            let (y0, y1) = (phi.apply(&f0), phi.apply(&f1));
            let out: f64 = y0.iter().zip(&y1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let mut x0 = vec![0.0f64; dim];
            let mut x1 = vec![0.0f64; dim];
            f0.iter().for_each(|&i| x0[i] += 1.0);
            f1.iter().for_each(|&i| x1[i] += 1.0);
            let inp: f64 = x0.iter().zip(&x1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(out <= inp + 1e-5);
        }
    }

    #[test]
    fn skill_rollouts_respect_the_cap(kind in env_kind(), seed in any::<u64>(), epsilon in 0.0f64..=1.0) {
        let env = kind.build();
        let skills = random_skills(kind, seed);
        let mut rng = stream(seed, "rollout", &[]);
        for z in 0..skills.len() {
            let h = execute_skill(&env, &skills, z, &env.initial_state(), epsilon, &mut rng);
            prop_assert!(h.actions.len() <= skills.max_steps);
            prop_assert_eq!(h.states.len(), h.actions.len() + 1);
        }
    }

    #[test]
    fn dominating_curves_have_larger_auc(
        base in prop::collection::vec(0.0f64..=1.0, 2..8),
        bumps in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let lengths: Vec<usize> = (1..=base.len()).collect();
        let upper: Vec<f64> = base.iter().zip(&bumps).map(|(b, d)| (b + d).min(1.0)).collect();
        prop_assert!(coverage_auc(&lengths, &upper).unwrap() >= coverage_auc(&lengths, &base).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coverage_is_a_monotone_fraction(seed in any::<u64>(), sampled in any::<bool>()) {
        let env = EnvKind::MudWorld.build();
        let skills = random_skills(EnvKind::MudWorld, seed);
        let mode = if sampled { CoverageMode::Sampled { chains: 4 } } else { CoverageMode::Exhaustive };
        let curve = coverage_curve(&env, &skills, &env.initial_state(), 3, mode, seed).unwrap();
        prop_assert!(curve.fractions.iter().all(|f| (0.0..=1.0).contains(f)));
        prop_assert!(curve.fractions.windows(2).all(|w| w[0] <= w[1]));
    }
}
