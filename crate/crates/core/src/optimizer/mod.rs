//! Decentralized proximal recursive-momentum gradient tracking and the DSGT
//! baseline.
//!
//! One iteration of the main method, with `W_T` the Chebyshev operator:
//!
//! ```text
//! Z   = W_T(X)
//! x_i+ = prox_{alpha_k r}(z_i - alpha_k y_i)
//! d_i+ = (1 - beta_k)(d_i + v_i - u_i) + beta_k vt_i
//! Y+  = W_T(Y + D+ - D)
//! ```
//!
//! where `v_i` and `u_i` are mini-batch gradients on one fresh batch at `x_i+`
//! and `x_i`, and `vt_i` is the unbiased estimate selected by [`Variant`].

mod diagnostics;
mod estimator;
mod schedule;
mod selection;
mod simulation;

pub use diagnostics::{lyapunov_initial, tracking_gap, tracking_tolerance, LyapunovTerms};
pub use estimator::{estimate_vtilde, Estimate};
pub use schedule::{
    default_alpha_constant, default_alpha_diminishing, max_alpha_constant, max_alpha_diminishing, min_k0, Schedule,
    ScheduleFamily,
};
pub use selection::{Selection, SelectionState};
pub use simulation::{run, Counters, RunOutput, SimState, Simulation};

use crate::problems::BatchSize;
use crate::{Error, Result};

/// Default standard deviation of the shared random starting point.
pub const DEFAULT_INIT_SCALE: f64 = 0.1;

/// Magnitude above which an iterate is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Unbiased estimate `vt_i^{(k+1)}` of `grad f_i(x_i^{(k+1)})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    /// Gradient at `x+` over a second, independent batch of size `m`.
    V1Sg,
    /// SVRG-style control variate around a snapshot refreshed every `period`
    /// iterations with a gradient over `snapshot_batch`.
    V1Svrg { period: usize, snapshot_batch: BatchSize },
    /// Reuse of `v_i` itself.
    V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorConfig {
    pub variant: Variant,
    /// Per-iteration batch `m`.
    pub batch: BatchSize,
    /// Initial batch `m0`.
    pub initial_batch: BatchSize,
}

impl EstimatorConfig {
    /// Variance bound `sigma_hat^2` of `vt`: `sigma^2 / m` for v1-SG and v2,
    /// `(3/m + 6/|snapshot batch|) sigma^2` for v1-SVRG. `shard_len` resolves
    /// full-shard batch sizes.
    pub fn sigma_hat_sq(&self, sigma: f64, shard_len: usize) -> f64 {
        let m = self.batch.count(shard_len) as f64;
        let s2 = sigma * sigma;
        match self.variant {
            Variant::V1Sg | Variant::V2 => s2 / m,
            Variant::V1Svrg { snapshot_batch, .. } => (3.0 / m + 6.0 / snapshot_batch.count(shard_len) as f64) * s2,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, b) in [("batch", self.batch), ("initial batch", self.initial_batch)] {
            if b == BatchSize::Sample(0) {
                return Err(Error::Config(alloc::format!("{name} size must be at least 1")));
            }
        }
        if let Variant::V1Svrg { period, snapshot_batch } = self.variant {
            if period == 0 {
                return Err(Error::Config("snapshot period must be at least 1".into()));
            }
            if snapshot_batch == BatchSize::Sample(0) {
                return Err(Error::Config("snapshot batch size must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Deepstorm(EstimatorConfig),
    /// Gradient-tracking SGD without a proximal step.
    Dsgt {
        batch: BatchSize,
        initial_batch: BatchSize,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Deepstorm(e) => match e.variant {
                Variant::V1Sg => "deepstorm-v1-sg",
                Variant::V1Svrg { .. } => "deepstorm-v1-svrg",
                Variant::V2 => "deepstorm-v2",
            },
            Self::Dsgt { .. } => "dsgt",
        }
    }
}

/// Everything that fixes a run besides the problem and the mixing matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunConfig {
    pub method: Method,
    pub schedule: Schedule,
    /// Chebyshev rounds `T` per communication.
    pub rounds: usize,
    /// Chebyshev rounds `T0` for the initial tracking variable.
    pub initial_rounds: usize,
    /// Number of iterations `K`.
    pub iterations: usize,
    pub seed: u64,
    pub selection: Selection,
    /// A trace record is taken at `k = 0`, every `record_every` iterations
    /// and at `k = K`.
    pub record_every: usize,
    /// Standard deviation of the shared starting point.
    pub init_scale: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.initial_rounds == 0 {
            return Err(Error::Config("mixing rounds T and T0 must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count K must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(Error::Config("init_scale must be finite and nonnegative".into()));
        }
        match self.method {
            Method::Deepstorm(e) => {
                e.validate()?;
                if matches!(self.schedule.family(), ScheduleFamily::InverseSqrt { .. }) {
                    return Err(Error::Config("the inverse-sqrt schedule is for DSGT only".into()));
                }
            }
            Method::Dsgt { batch, initial_batch } => {
                if batch == BatchSize::Sample(0) || initial_batch == BatchSize::Sample(0) {
                    return Err(Error::Config("batch sizes must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}
