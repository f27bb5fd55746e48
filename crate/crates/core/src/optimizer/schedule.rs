//! Step-size and momentum schedules.

use alloc::format;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScheduleFamily {
    /// `alpha_k = alpha / K^{1/3}`, `beta_k = 144 L^2 alpha^2 / (N K^{2/3})`.
    Constant { alpha: f64, horizon: usize },
    /// `alpha_k = alpha / (k + k0)^{1/3}`,
    /// `beta_k = 1 - alpha_{k+1}/alpha_k + 48 L^2 alpha_{k+1}^2`.
    Diminishing { alpha: f64, k0: usize },
    /// Diminishing step with a free momentum coefficient:
    /// `beta_k = 1 - alpha_{k+1}/alpha_k + beta_coef alpha_{k+1}^2`.
    Practical { alpha: f64, k0: usize, beta_coef: f64 },
    /// Constant `alpha` and `beta`; `beta = 1` drops the recursive correction.
    Fixed { alpha: f64, beta: f64 },
    /// `alpha_k = alpha / sqrt(k + 1)`, used by the DSGT baseline.
    InverseSqrt { alpha: f64 },
}

/// A validated schedule for a given smoothness `L` and network size `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Schedule {
    family: ScheduleFamily,
    smoothness: f64,
    n_agents: usize,
}

/// Largest admissible base step for the constant family:
/// `min{K^{1/3} / (32 L), (1 - rho_tilde)^2 K^{1/3} / (64 L)}`.
pub fn max_alpha_constant(horizon: usize, smoothness: f64, rho_tilde: f64) -> f64 {
    max_alpha_for(horizon as f64, smoothness, rho_tilde)
}

/// Largest admissible base step for the diminishing family, the same bound
/// with `k0` in place of `K`.
pub fn max_alpha_diminishing(k0: usize, smoothness: f64, rho_tilde: f64) -> f64 {
    max_alpha_for(k0 as f64, smoothness, rho_tilde)
}

fn max_alpha_for(scale: f64, smoothness: f64, rho_tilde: f64) -> f64 {
    let c = libm::cbrt(scale);
    let gap = 1.0 - rho_tilde;
    (c / (32.0 * smoothness)).min(gap * gap * c / (64.0 * smoothness))
}

/// Smallest admissible `k0 = ceil(2 / (1 - rho_tilde^3))`.
pub fn min_k0(rho_tilde: f64) -> usize {
    libm::ceil(2.0 / (1.0 - rho_tilde * rho_tilde * rho_tilde)) as usize
}

/// Base step `N^{2/3} / (64 L)` for the constant family, capped by its bound.
pub fn default_alpha_constant(horizon: usize, smoothness: f64, n_agents: usize, rho_tilde: f64) -> f64 {
    let suggested = libm::pow(n_agents as f64, 2.0 / 3.0) / (64.0 * smoothness);
    suggested.min(max_alpha_constant(horizon, smoothness, rho_tilde))
}

/// Base step `1 / (64 L)` for the diminishing family, capped by its bound.
pub fn default_alpha_diminishing(k0: usize, smoothness: f64, rho_tilde: f64) -> f64 {
    (1.0 / (64.0 * smoothness)).min(max_alpha_diminishing(k0, smoothness, rho_tilde))
}

// Relative slack when comparing a step against its bound, so that a step set
// exactly to the printed bound is accepted.
const BOUND_SLACK: f64 = 1e-12;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Schedule(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_alpha_bound(alpha: f64, scale: f64, smoothness: f64, rho_tilde: f64, sym: &str) -> Result<()> {
    let c = libm::cbrt(scale);
    let first = c / (32.0 * smoothness);
    if alpha > first * (1.0 + BOUND_SLACK) {
        return Err(Error::Schedule(format!("alpha = {alpha} violates α ≤ {sym}^{{1/3}}/(32L) = {first}")));
    }
    let gap = 1.0 - rho_tilde;
    let second = gap * gap * c / (64.0 * smoothness);
    if alpha > second * (1.0 + BOUND_SLACK) {
        return Err(Error::Schedule(format!(
            "alpha = {alpha} violates α ≤ (1−ρ̃)²{sym}^{{1/3}}/(64L) = {second} (ρ̃ = {rho_tilde})"
        )));
    }
    Ok(())
}

impl Schedule {
    /// Constant family with the step bound checked against `rho_tilde`.
    pub fn constant(alpha: f64, horizon: usize, smoothness: f64, n_agents: usize, rho_tilde: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("L", smoothness)?;
        if horizon == 0 || n_agents == 0 {
            return Err(Error::Schedule("horizon K and agent count must be positive".into()));
        }
        check_alpha_bound(alpha, horizon as f64, smoothness, rho_tilde, "K")?;
        Ok(Self { family: ScheduleFamily::Constant { alpha, horizon }, smoothness, n_agents })
    }

    /// Diminishing family with the `k0` and step bounds checked against `rho_tilde`.
    pub fn diminishing(alpha: f64, k0: usize, smoothness: f64, n_agents: usize, rho_tilde: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("L", smoothness)?;
        let k0_min = min_k0(rho_tilde);
        if k0 < k0_min {
            return Err(Error::Schedule(format!("k0 = {k0} violates k₀ ≥ ⌈2/(1−ρ̃³)⌉ = {k0_min} (ρ̃ = {rho_tilde})")));
        }
        check_alpha_bound(alpha, k0 as f64, smoothness, rho_tilde, "k₀")?;
        Ok(Self { family: ScheduleFamily::Diminishing { alpha, k0 }, smoothness, n_agents })
    }

    /// Practical variant; requires `0 <= beta_coef < 1 / (alpha_0 alpha_1)`.
    pub fn practical(alpha: f64, k0: usize, beta_coef: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        if k0 == 0 {
            return Err(Error::Schedule("k0 must be positive".into()));
        }
        let a0 = alpha / libm::cbrt(k0 as f64);
        let a1 = alpha / libm::cbrt(k0 as f64 + 1.0);
        let cap = 1.0 / (a0 * a1);
        if !(beta_coef >= 0.0 && beta_coef < cap) {
            return Err(Error::Schedule(format!("beta_coef = {beta_coef} violates 0 ≤ β < 1/(α₀α₁) = {cap}")));
        }
        Ok(Self { family: ScheduleFamily::Practical { alpha, k0, beta_coef }, smoothness: 0.0, n_agents: 0 })
    }

    /// Fixed step and momentum, `beta` in `(0, 1]`.
    pub fn fixed(alpha: f64, beta: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Schedule(format!("beta = {beta} must lie in (0, 1]")));
        }
        Ok(Self { family: ScheduleFamily::Fixed { alpha, beta }, smoothness: 0.0, n_agents: 0 })
    }

    pub fn inverse_sqrt(alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        Ok(Self { family: ScheduleFamily::InverseSqrt { alpha }, smoothness: 0.0, n_agents: 0 })
    }

    /// Any family without the step-size bounds; `beta_k` is still checked
    /// when evaluated.
    pub fn unchecked(family: ScheduleFamily, smoothness: f64, n_agents: usize) -> Self {
        Self { family, smoothness, n_agents }
    }

    pub fn family(&self) -> ScheduleFamily {
        self.family
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match self.family {
            ScheduleFamily::Constant { alpha, horizon } => alpha / libm::cbrt(horizon as f64),
            ScheduleFamily::Diminishing { alpha, k0 } | ScheduleFamily::Practical { alpha, k0, .. } => {
                alpha / libm::cbrt((k + k0) as f64)
            }
            ScheduleFamily::Fixed { alpha, .. } => alpha,
            ScheduleFamily::InverseSqrt { alpha } => alpha / libm::sqrt((k + 1) as f64),
        }
    }

    /// Momentum `beta_k`. Errors if the value leaves `(0, 1)`, or `(0, 1]`
    /// for the fixed family.
    pub fn beta(&self, k: usize) -> Result<f64> {
        let l = self.smoothness;
        let beta = match self.family {
            ScheduleFamily::Constant { alpha, horizon } => {
                let k23 = libm::pow(horizon as f64, 2.0 / 3.0);
                144.0 * l * l * alpha * alpha / (self.n_agents as f64 * k23)
            }
            ScheduleFamily::Diminishing { .. } => {
                let (a, a1) = (self.alpha(k), self.alpha(k + 1));
                1.0 - a1 / a + 48.0 * l * l * a1 * a1
            }
            ScheduleFamily::Practical { beta_coef, .. } => {
                let (a, a1) = (self.alpha(k), self.alpha(k + 1));
                1.0 - a1 / a + beta_coef * a1 * a1
            }
            ScheduleFamily::Fixed { beta, .. } => return Ok(beta),
            ScheduleFamily::InverseSqrt { .. } => {
                return Err(Error::Schedule("the inverse-sqrt schedule has no momentum".into()))
            }
        };
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Schedule(format!("beta_{k} = {beta} left (0, 1)")));
        }
        Ok(beta)
    }

    /// `(alpha_k, beta_k)`.
    pub fn values(&self, k: usize) -> Result<(f64, f64)> {
        Ok((self.alpha(k), self.beta(k)?))
    }

    /// Output-selection rule matching the family: uniform for constant steps,
    /// proportional to `alpha_k` otherwise.
    pub fn default_selection(&self) -> super::Selection {
        match self.family {
            ScheduleFamily::Constant { .. } | ScheduleFamily::Fixed { .. } => super::Selection::Uniform,
            _ => super::Selection::AlphaWeighted,
        }
    }
}
