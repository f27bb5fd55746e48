//! Stationarity, consensus and sparsity of an iterate matrix `X` (one row per
//! agent).

use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::problems::{self, LocalObjective};
use crate::proximal::{prox, prox_grad_map};

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub k: usize,
    /// `phi(x_bar)`.
    pub loss: f64,
    pub stationarity_def2: f64,
    pub stationarity_exp: f64,
    /// `||X_perp||_F^2`.
    pub consensus: f64,
    pub sparsity_pct: f64,
    /// Stochastic samples drawn, summed over agents.
    pub samples: u64,
    /// Per-sample gradient evaluations, summed over agents.
    pub grad_evals: u64,
    /// Communication rounds (each is one multiplication by `W`).
    pub comm_rounds: u64,
    /// Samples drawn divided by the total data size.
    pub passes: f64,
    /// Training accuracy of `x_bar`, logistic problems only.
    pub accuracy: Option<f64>,
}

/// `||X - (1/N) e e^T X||_F^2`.
pub fn consensus(x: &Matrix) -> f64 {
    x.deviation_from_mean().frobenius_sq()
}

/// `(1/N) sum_i ||P(x_i, grad f(x_i), eta)||^2 + (L^2/N) ||X_perp||_F^2` with
/// full gradients of the global smooth part.
pub fn stationarity_def2<O: LocalObjective + ?Sized>(x: &Matrix, problem: &O, eta: f64) -> f64 {
    let n = x.rows() as f64;
    let r = problem.regularizer();
    let mapped: f64 = x
        .row_iter()
        .map(|xi| linalg::norm_sq(&prox_grad_map(xi, &problems::global_gradient(problem, xi), eta, &r)))
        .sum();
    let l = problem.smoothness();
    mapped / n + l * l / n * consensus(x)
}

/// `||x_bar - prox_r(x_bar - grad f(x_bar))||^2 + sum_i ||x_i - x_bar||^2`.
pub fn stationarity_experiment<O: LocalObjective + ?Sized>(x: &Matrix, problem: &O) -> f64 {
    let mean = x.row_mean();
    let g = problems::global_gradient(problem, &mean);
    let shifted: Vec<f64> = mean.iter().zip(&g).map(|(m, gi)| m - gi).collect();
    let p = prox(&problem.regularizer(), 1.0, &shifted);
    linalg::dist_sq(&mean, &p) + consensus(x)
}

/// `100 *` mean over agents of the fraction of exactly nonzero coordinates.
pub fn sparsity_pct(x: &Matrix) -> f64 {
    if x.rows() == 0 || x.cols() == 0 {
        return 0.0;
    }
    let nonzero = x.as_slice().iter().filter(|v| **v != 0.0).count();
    100.0 * nonzero as f64 / (x.rows() * x.cols()) as f64
}
