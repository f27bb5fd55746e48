//! The unbiased estimate `vt` fed into the recursive-momentum update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Variant;
use crate::problems::{self, draw_batch, BatchSize, LocalObjective};
use crate::{Error, Result};

/// An estimate together with what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub samples: usize,
    pub grad_evals: usize,
}

/// Computes `vt_i` at `x_plus`.
///
/// `v` is the gradient at `x_plus` over the iteration's main batch; v2
/// returns it unchanged. v1-SG averages a fresh batch of size `batch` at
/// `x_plus`. v1-SVRG evaluates a fresh batch at both `x_plus` and the snapshot
/// point and adds the stored snapshot gradient. Fresh batches come from the
/// agent's own stream `rng`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_vtilde<O: LocalObjective + ?Sized, R: Rng + ?Sized>(
    problem: &O,
    variant: Variant,
    batch: BatchSize,
    agent: usize,
    x_plus: &[f64],
    v: &[f64],
    snapshot: Option<(&[f64], &[f64])>,
    rng: &mut R,
) -> Result<Estimate> {
    match variant {
        Variant::V2 => Ok(Estimate { value: v.to_vec(), samples: 0, grad_evals: 0 }),
        Variant::V1Sg => {
            let b = draw_batch(problem, agent, batch, rng);
            let value = problems::stochastic_gradient(problem, agent, x_plus, &b)?;
            Ok(Estimate { value, samples: b.len(), grad_evals: b.len() })
        }
        Variant::V1Svrg { .. } => {
            let (sx, sg) = snapshot.ok_or_else(|| Error::State("v1-SVRG snapshot missing".into()))?;
            let b = draw_batch(problem, agent, batch, rng);
            let mut value = problems::stochastic_gradient(problem, agent, x_plus, &b)?;
            let mut at_snapshot = vec![0.0; value.len()];
            problems::stochastic_gradient_into(problem, agent, sx, &b, &mut at_snapshot)?;
            for ((o, a), g) in value.iter_mut().zip(&at_snapshot).zip(sg) {
                *o = *o - a + g;
            }
            Ok(Estimate { value, samples: b.len(), grad_evals: 2 * b.len() })
        }
    }
}
