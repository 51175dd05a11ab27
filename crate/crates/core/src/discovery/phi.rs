use serde::{Deserialize, Serialize};

use super::DiscoveryError;
use crate::env::{Env, FactoredState};

const MIN_POWER_ITERS: usize = 50;
const MAX_POWER_ITERS: usize = 10_000;
const POWER_TOL: f64 = 1e-15;

/// Active indices of the concatenated one-hot encoding of every variable.
pub fn state_features(env: &Env, state: &FactoredState) -> Vec<usize> {
    let mut offset = 0;
    let mut active = Vec::with_capacity(env.num_vars());
    for i in 0..env.num_vars() {
        active.push(offset + env.value_index(state, i) as usize);
        offset += env.domain(i);
    }
    active
}

/// Length of [`state_features`]' dense encoding.
pub fn state_feature_dim(env: &Env) -> usize {
    (0..env.num_vars()).map(|i| env.domain(i)).sum()
}

/// Active index of variable `i`'s one-hot encoding.
pub fn variable_feature(env: &Env, state: &FactoredState, i: usize) -> Vec<usize> {
    vec![env.value_index(state, i) as usize]
}

/// Linear map from a binary feature vector to `R^outputs`, kept 1-Lipschitz
/// by spectral normalization after every gradient step.
///
/// Features are passed sparsely as the list of active (unit) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPhi {
    pub outputs: usize,
    pub inputs: usize,
    pub learning_rate: f64,
    /// Row-major `outputs x inputs`.
    pub matrix: Vec<f64>,
    /// Warm start for the power iteration.
    power_vector: Vec<f64>,
}

impl LinearPhi {
    pub fn zeros(outputs: usize, inputs: usize, learning_rate: f64) -> Self {
        Self {
            outputs,
            inputs,
            learning_rate,
            matrix: vec![0.0; outputs * inputs],
            power_vector: vec![1.0 / (outputs as f64).sqrt(); outputs],
        }
    }

    pub fn from_matrix(outputs: usize, inputs: usize, matrix: Vec<f64>, learning_rate: f64) -> Result<Self, DiscoveryError> {
        if matrix.len() != outputs * inputs {
            return Err(DiscoveryError::Shape(format!(
                "phi matrix has {} entries, expected {outputs}x{inputs}",
                matrix.len()
            )));
        }
        let mut phi = Self::zeros(outputs, inputs, learning_rate);
        phi.matrix = matrix;
        Ok(phi)
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.inputs + col]
    }

    pub fn apply(&self, active: &[usize]) -> Vec<f64> {
        (0..self.outputs).map(|r| active.iter().map(|&c| self.at(r, c)).sum()).collect()
    }

    /// `<phi(f_t) - phi(f_0), e_z>`.
    pub fn projected_difference(&self, active_0: &[usize], active_t: &[usize], z: usize) -> f64 {
        let forward: f64 = active_t.iter().map(|&c| self.at(z, c)).sum();
        let back: f64 = active_0.iter().map(|&c| self.at(z, c)).sum();
        forward - back
    }

    /// Dense gradient of [`LinearPhi::projected_difference`]: `e_z (x) (f_t - f_0)`.
    pub fn gradient(&self, active_0: &[usize], active_t: &[usize], z: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.matrix.len()];
        for &c in active_t {
            g[z * self.inputs + c] += 1.0;
        }
        for &c in active_0 {
            g[z * self.inputs + c] -= 1.0;
        }
        g
    }

    /// One ascent step on the projected difference followed by projection.
    pub fn update(&mut self, active_0: &[usize], active_t: &[usize], z: usize) -> Result<(), DiscoveryError> {
        let lr = self.learning_rate;
        for &c in active_t {
            self.matrix[z * self.inputs + c] += lr;
        }
        for &c in active_0 {
            self.matrix[z * self.inputs + c] -= lr;
        }
        self.spectral_normalize()
    }

    /// Largest singular value, by power iteration on `W W^T`.
    pub fn spectral_norm(&mut self) -> Result<f64, DiscoveryError> {
        if self.matrix.iter().any(|x| !x.is_finite()) {
            return Err(DiscoveryError::NonFinite);
        }
        let n = self.outputs;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            let ri = &self.matrix[i * self.inputs..(i + 1) * self.inputs];
            for j in i..n {
                let rj = &self.matrix[j * self.inputs..(j + 1) * self.inputs];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                gram[i * n + j] = dot;
                gram[j * n + i] = dot;
            }
        }
        if gram.iter().all(|x| *x == 0.0) {
            return Ok(0.0);
        }
        let mut v = self.power_vector.clone();
        if norm(&v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
            v = vec![1.0 / (n as f64).sqrt(); n];
        }
        let mut w = vec![0.0; n];
        let mut estimate = 0.0f64;
        for iter in 0..MAX_POWER_ITERS {
            for i in 0..n {
                w[i] = (0..n).map(|j| gram[i * n + j] * v[j]).sum();
            }
            let w_norm = norm(&w);
            if w_norm == 0.0 {
                // Warm start orthogonal to the range; restart from a generic vector.
                v = (0..n).map(|i| 1.0 + i as f64 * 0.618).collect();
                let vn = norm(&v);
                v.iter_mut().for_each(|x| *x /= vn);
                continue;
            }
            // Rayleigh quotient of the normalized iterate.
            let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            for i in 0..n {
                v[i] = w[i] / w_norm;
            }
            let converged = (next - estimate).abs() <= POWER_TOL * next.abs().max(1e-300);
            estimate = next;
            if iter + 1 >= MIN_POWER_ITERS && converged {
                break;
            }
        }
        self.power_vector = v;
        Ok(estimate.max(0.0).sqrt())
    }

    /// Divides the matrix by its largest singular value when that exceeds 1.
    pub fn spectral_normalize(&mut self) -> Result<(), DiscoveryError> {
        let sigma = self.spectral_norm()?;
        if sigma > 1.0 {
            self.matrix.iter_mut().for_each(|x| *x /= sigma);
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
