//! Skill rewards. Natural logarithms throughout; probabilities are floored
//! at [`PROB_FLOOR`] before the log.

use super::discriminator::EwmaDiscriminator;
use super::phi::LinearPhi;
use crate::env::StateKey;

pub const PROB_FLOOR: f64 = 1e-8;

pub fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `log d(z | key) - log nu(z)`.
pub fn log_ratio(d: &EwmaDiscriminator, key: StateKey, z: usize, nu: f64) -> f64 {
    floored_ln(d.prob(key, z)) - nu.ln()
}

/// Log-ratio against the uniform prior over the discriminator's own support.
pub fn support_log_ratio(d: &EwmaDiscriminator, key: StateKey, z: usize) -> f64 {
    log_ratio(d, key, z, 1.0 / d.support().len() as f64)
}

/// Terminal VIC reward; `key` encodes the `(s0, sT)` pair.
pub fn vic_reward(d: &EwmaDiscriminator, nu: f64, key: StateKey, z: usize) -> f64 {
    log_ratio(d, key, z, nu)
}

/// Per-step DIAYN reward; `key` encodes the current state.
pub fn diayn_reward(d: &EwmaDiscriminator, nu: f64, key: StateKey, z: usize) -> f64 {
    log_ratio(d, key, z, nu)
}

/// `<phi(sT) - phi(s0), e_z>`, with features given by their active indices.
pub fn lsd_reward(phi: &LinearPhi, feat_0: &[usize], z: usize, feat_t: &[usize]) -> f64 {
    phi.projected_difference(feat_0, feat_t, z)
}

/// Sum of per-target discriminator terms minus the side-effects penalty.
///
/// Each `(d_i, key_i)` pairs a target's discriminator with its condition key.
pub fn focused_mi_reward<'a>(terms: impl IntoIterator<Item = (&'a EwmaDiscriminator, StateKey)>, z: usize, penalty: f64) -> f64 {
    terms.into_iter().map(|(d, key)| support_log_ratio(d, key, z)).sum::<f64>() - penalty
}

/// Focused VIC: per-target keys encode `(s0^i, sT^i)`.
pub fn focused_vic_reward<'a>(terms: impl IntoIterator<Item = (&'a EwmaDiscriminator, StateKey)>, z: usize, penalty: f64) -> f64 {
    focused_mi_reward(terms, z, penalty)
}

/// Focused DIAYN: per-target keys encode `st^i`; the penalty compares `st` with the episode's `s0`.
pub fn focused_diayn_reward<'a>(terms: impl IntoIterator<Item = (&'a EwmaDiscriminator, StateKey)>, z: usize, penalty: f64) -> f64 {
    focused_mi_reward(terms, z, penalty)
}

/// Focused LSD: each `(phi_i, f0_i, fT_i)` is a target's map and one-hot features.
///
/// `sign = 1.0` orients the difference final-minus-initial; `-1.0` flips it.
pub fn focused_lsd_reward<'a>(
    terms: impl IntoIterator<Item = (&'a LinearPhi, &'a [usize], &'a [usize])>,
    z: usize,
    penalty: f64,
    sign: f64,
) -> f64 {
    terms.into_iter().map(|(phi, f0, ft)| sign * phi.projected_difference(f0, ft, z)).sum::<f64>() - penalty
}

/// DUSDi: target terms minus `beta` times the log-ratio of a discriminator
/// that predicts the skill from the non-target variables.
///
/// Each item is `(d_i, key_i, d_pen_i, pen_key_i)`.
pub fn dusdi_reward<'a>(
    terms: impl IntoIterator<Item = (&'a EwmaDiscriminator, StateKey, &'a EwmaDiscriminator, StateKey)>,
    z: usize,
    beta: f64,
) -> f64 {
    terms
        .into_iter()
        .map(|(d, key, pen, pen_key)| support_log_ratio(d, key, z) - beta * support_log_ratio(pen, pen_key, z))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: StateKey = StateKey(7);

    fn disc_with(support: Vec<usize>, z: usize, p: f64) -> EwmaDiscriminator {
        let n = support.len();
        let slot = support.iter().position(|s| *s == z).unwrap();
        let rest = (1.0 - p) / (n - 1) as f64;
        let mut row = vec![rest; n];
        row[slot] = p;
        EwmaDiscriminator::new(support, 0.5).with_rows([(K, row)]).unwrap()
    }

    #[test]
    fn vic_examples() {
        let nu = 1.0 / 16.0;
        let uniform = EwmaDiscriminator::new((0..16).collect(), 0.7);
        assert_eq!(vic_reward(&uniform, nu, K, 4), 0.0);
        let half = disc_with((0..16).collect(), 4, 0.5);
        assert!((vic_reward(&half, nu, K, 4) - 8f64.ln()).abs() < 1e-12);
        let tiny = disc_with((0..16).collect(), 4, 1e-9);
        assert!((vic_reward(&tiny, nu, K, 4) - (1e-8f64 * 16.0).ln()).abs() < 1e-12);
        assert!((vic_reward(&tiny, nu, K, 4) + 15.6481).abs() < 1e-4);
    }

    #[test]
    fn diayn_certain_prediction() {
        let sure = disc_with((0..16).collect(), 2, 1.0);
        assert!((diayn_reward(&sure, 1.0 / 16.0, K, 2) - 16f64.ln()).abs() < 1e-12);
        assert_eq!(diayn_reward(&sure, 1.0 / 16.0, K, 2), diayn_reward(&sure, 1.0 / 16.0, K, 2));
    }

    #[test]
    fn lsd_examples() {
        let mut phi = LinearPhi::zeros(16, 4, 0.1);
        phi.matrix[4 + 3] = 1.0;
        assert_eq!(lsd_reward(&phi, &[2], 1, &[2]), 0.0);
        assert_eq!(lsd_reward(&phi, &[0], 1, &[3]), 1.0);
        assert_eq!(lsd_reward(&phi, &[0], 2, &[3]), 0.0);
    }

    #[test]
    fn focused_vic_examples() {
        let uniform = EwmaDiscriminator::new(vec![0, 1], 0.7);
        assert_eq!(focused_vic_reward([(&uniform, K)], 0, 0.0), 0.0);
        let d = disc_with(vec![0, 1], 0, 0.9);
        assert!((focused_vic_reward([(&d, K)], 0, 0.0) - 1.8f64.ln()).abs() < 1e-12);
        assert_eq!(focused_vic_reward([(&uniform, K)], 0, 10.0), -10.0);
    }

    #[test]
    fn focused_diayn_mud_step() {
        let uniform = EwmaDiscriminator::new(vec![0, 1], 0.05);
        let penalty = 10.0 / 20.0;
        assert_eq!(focused_diayn_reward([(&uniform, K)], 1, penalty), -0.5);
    }

    #[test]
    fn focused_lsd_examples() {
        let mut phi = LinearPhi::zeros(16, 3, 0.1);
        assert_eq!(focused_lsd_reward([(&phi, &[1][..], &[1][..])], 5, 0.0, 1.0), 0.0);
        phi.matrix[5 * 3 + 2] = 0.5;
        phi.matrix[5 * 3] = -0.5;
        assert_eq!(focused_lsd_reward([(&phi, &[0][..], &[2][..])], 5, 0.0, 1.0), 1.0);
        assert_eq!(focused_lsd_reward([(&phi, &[0][..], &[2][..])], 5, 2.0, 1.0), -1.0);
        assert_eq!(focused_lsd_reward([(&phi, &[0][..], &[2][..])], 5, 0.0, -1.0), -1.0);
    }

    #[test]
    fn dusdi_examples() {
        let uniform = EwmaDiscriminator::new(vec![0, 1], 0.7);
        assert_eq!(dusdi_reward([(&uniform, K, &uniform, K)], 0, 0.1), 0.0);
        let d = disc_with(vec![0, 1], 0, 0.9);
        assert!((dusdi_reward([(&d, K, &uniform, K)], 0, 0.1) - 1.8f64.ln()).abs() < 1e-12);
        let r = dusdi_reward([(&uniform, K, &d, K)], 0, 0.1);
        assert!((r + 0.1 * 1.8f64.ln()).abs() < 1e-12);
        assert!((r + 0.0588).abs() < 1e-4);
    }
}
