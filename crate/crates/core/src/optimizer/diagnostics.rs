//! Quantities reported alongside a run but never fed back into it.

use crate::linalg::{self, Matrix};
use crate::problems::{self, LocalObjective};
use crate::Result;

/// `||y_bar - d_bar||`, zero in exact arithmetic at every iteration.
pub fn tracking_gap(y: &Matrix, d: &Matrix) -> f64 {
    libm::sqrt(linalg::dist_sq(&y.row_mean(), &d.row_mean()))
}

/// `1e-10 (1 + ||D||_F)`, the tolerance used for [`tracking_gap`].
pub fn tracking_tolerance(d: &Matrix) -> f64 {
    1e-10 * (1.0 + d.frobenius())
}

/// Terms of the potential
/// `Phi = phi(x_bar) + g1 ||Y_perp||^2 + g2 ||X_perp||^2 + g3 ||R||^2 + g4 ||r_bar||^2`
/// with `R = D - grad F(X)` and `r_bar` its row mean, for the constant family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovTerms {
    pub objective: f64,
    pub y_perp: f64,
    pub x_perp: f64,
    pub residual: f64,
    pub residual_mean: f64,
    pub total: f64,
}

/// Evaluates the potential at `(X, D, Y)` with coefficients
/// `g1 = 1/(N L (1 - rho_tilde))`, `g2 = 16 K^{1/3} / (N (1 - rho_tilde) alpha)`,
/// `g3 = K^{1/3} / (48 N L^2 alpha)`, `g4 = N K^{1/3} / (48 L^2 alpha)`.
pub fn lyapunov_initial<O: LocalObjective + ?Sized>(
    problem: &O,
    x: &Matrix,
    d: &Matrix,
    y: &Matrix,
    rho_tilde: f64,
    alpha: f64,
    horizon: usize,
) -> Result<LyapunovTerms> {
    x.check_same_shape(d)?;
    x.check_same_shape(y)?;
    let n = x.rows() as f64;
    let l = problem.smoothness();
    let k13 = libm::cbrt(horizon as f64);
    let gap = 1.0 - rho_tilde;

    let mut residual = d.clone();
    for i in 0..x.rows() {
        let g = problems::full_gradient(problem, i, x.row(i));
        linalg::axpy(-1.0, &g, residual.row_mut(i));
    }
    let objective = problems::objective(problem, &x.row_mean());
    let y_perp = y.deviation_from_mean().frobenius_sq();
    let x_perp = x.deviation_from_mean().frobenius_sq();
    let r_sq = residual.frobenius_sq();
    let r_bar_sq = linalg::norm_sq(&residual.row_mean());

    let g1 = 1.0 / (n * l * gap);
    let g2 = 16.0 * k13 / (n * gap * alpha);
    let g3 = k13 / (48.0 * n * l * l * alpha);
    let g4 = n * k13 / (48.0 * l * l * alpha);
    let terms = LyapunovTerms {
        objective,
        y_perp: g1 * y_perp,
        x_perp: g2 * x_perp,
        residual: g3 * r_sq,
        residual_mean: g4 * r_bar_sq,
        total: 0.0,
    };
    Ok(LyapunovTerms {
        total: terms.objective + terms.y_perp + terms.x_perp + terms.residual + terms.residual_mean,
        ..terms
    })
}
