//! Convex regularizers with closed-form proximal maps.

use alloc::vec::Vec;

use crate::{Error, Result};

/// The nonsmooth part `r` of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regularizer {
    Zero,
    L1 { lambda: f64 },
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Problem(alloc::format!("l1 strength must be finite and >= 0, got {lambda}")));
        }
        Ok(Self::L1 { lambda })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `prox_{eta r}(v)` written into `out`.
    pub fn prox_into(&self, eta: f64, v: &[f64], out: &mut [f64]) {
        match *self {
            Self::Zero => out.copy_from_slice(v),
            Self::L1 { lambda } => {
                let t = eta * lambda;
                for (o, &vi) in out.iter_mut().zip(v) {
                    *o = soft_threshold(vi, t);
                }
            }
        }
    }
}

/// `sign(v) max(|v| - t, 0)`; ties `|v| = t` land on zero.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `prox_{eta r}(v) = argmin_u { eta r(u) + 1/2 ||u - v||^2 }`.
pub fn prox(r: &Regularizer, eta: f64, v: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; v.len()];
    r.prox_into(eta, v, &mut out);
    out
}

/// Proximal-gradient mapping `P(x, y, eta) = (x - prox_{eta r}(x - eta y)) / eta`.
///
/// For `r = 0` the map is `y` itself and is returned without rounding.
pub fn prox_grad_map(x: &[f64], y: &[f64], eta: f64, r: &Regularizer) -> Vec<f64> {
    if *r == Regularizer::Zero {
        return y.to_vec();
    }
    let shifted: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| xi - eta * yi).collect();
    let p = prox(r, eta, &shifted);
    x.iter().zip(&p).map(|(xi, pi)| (xi - pi) / eta).collect()
}

/// The local update `argmin_x { alpha r(x) + 1/2 ||x - (z - alpha y)||^2 }`.
pub fn prox_step(z: &[f64], y: &[f64], alpha: f64, r: &Regularizer) -> Vec<f64> {
    let mut out = alloc::vec![0.0; z.len()];
    prox_step_into(z, y, alpha, r, &mut out);
    out
}

pub fn prox_step_into(z: &[f64], y: &[f64], alpha: f64, r: &Regularizer, out: &mut [f64]) {
    for ((o, zi), yi) in out.iter_mut().zip(z).zip(y) {
        *o = zi - alpha * yi;
    }
    match *r {
        Regularizer::Zero => {}
        Regularizer::L1 { lambda } => {
            let t = alpha * lambda;
            out.iter_mut().for_each(|o| *o = soft_threshold(*o, t));
        }
    }
}
