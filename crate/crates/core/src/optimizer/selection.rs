//! Random choice of the output iterate `Z^{(tau)}`, `tau in {0, .., K-1}`.
//!
//! The choice is made online with a weighted reservoir of size one: after
//! seeing `Z^{(k)}` with weight `w_k`, the held iterate is replaced with
//! probability `w_k / (w_0 + .. + w_k)`. This yields
//! `P(tau = k) = w_k / sum_j w_j` without storing past iterates, and the state
//! survives checkpoints.

use rand::Rng;

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Selection {
    /// `P(tau = k) = 1/K`.
    Uniform,
    /// `P(tau = k) ∝ alpha_k`.
    AlphaWeighted,
}

impl Selection {
    pub fn weight(&self, alpha_k: f64) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::AlphaWeighted => alpha_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionState {
    pub total_weight: f64,
    pub tau: Option<usize>,
    pub chosen: Option<Matrix>,
}

impl SelectionState {
    /// Offers `Z^{(k)}` with weight `w`. The draw always consumes one value
    /// from `rng`, so the stream position does not depend on the outcome.
    pub fn offer<R: Rng + ?Sized>(&mut self, k: usize, z: &Matrix, w: f64, rng: &mut R) {
        self.total_weight += w;
        let u: f64 = rng.random();
        if self.tau.is_none() || u * self.total_weight < w {
            self.tau = Some(k);
            self.chosen = Some(z.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_offer_is_taken() {
        let mut s = SelectionState::default();
        let z = Matrix::identity(2);
        s.offer(0, &z, 0.3, &mut rng::run_stream(1));
        assert_eq!(s.tau, Some(0));
        assert_eq!(s.chosen, Some(z));
    }
}
