//! Decentralized proximal stochastic recursive momentum.
//!
//! This crate holds the numerical core of a simulator for decentralized
//! nonconvex stochastic composite optimization:
//!
//! * [`topology`]: communication graphs, mixing matrices, the spectral gap and
//!   Chebyshev-accelerated multi-round gossip.
//! * [`proximal`]: regularizers with closed-form proximal maps and the
//!   proximal-gradient mapping.
//! * [`problems`]: local objectives held as per-agent data shards, with full and
//!   mini-batch gradients.
//! * [`optimizer`]: the recursive-momentum gradient-tracking method with its
//!   three estimator variants, step-size schedules, output selection, and the
//!   DSGT baseline.
//! * [`metrics`]: stationarity, consensus and sparsity measures.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches files,
//! the command line or threads lives in the companion `dstorm` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod problems;
pub mod proximal;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::Matrix;
