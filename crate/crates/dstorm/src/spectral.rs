//! Graph specs for the `spectral` subcommand.
//!
//! A spec is `<kind>:<n>` for `ring`, `ladder`, `complete` and `path`,
//! `random:<n>[:<density>[:<seed>]]`, or `file:<path>` for an adjacency
//! matrix.

use std::path::PathBuf;

use dstorm_core::optimizer::min_k0;
use dstorm_core::topology::{
    build_graph, chebyshev_rounds_for_target, initial_rounds, laplacian_mixing, uniform_ring_mixing, ChebyshevOperator,
    Graph, GraphKind, MixingMatrix,
};

use crate::config::Weights;
use crate::error::{HarnessError, Result};
use crate::io;

pub fn parse_graph_spec(spec: &str) -> Result<Graph> {
    let bad = |m: String| HarnessError::Config(format!("graph spec {spec:?}: {m}"));
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("expected <kind>:<n>".into()))?;
    if kind == "file" {
        return io::read_graph(&PathBuf::from(rest));
    }
    let parts: Vec<&str> = rest.split(':').collect();
    let n: usize = parts[0].parse().map_err(|_| bad(format!("{:?} is not a node count", parts[0])))?;
    let extra = |i: usize| parts.get(i).copied();
    let kind = match kind {
        "ring" => GraphKind::Ring,
        "ladder" => GraphKind::Ladder,
        "complete" => GraphKind::Complete,
        "path" => GraphKind::Path,
        "random" => {
            let density = extra(1).map_or(Ok(0.5), |d| d.parse().map_err(|_| bad(format!("bad density {d:?}"))))?;
            GraphKind::RandomConnected { density }
        }
        other => return Err(bad(format!("unknown kind {other:?}"))),
    };
    let max_parts = if matches!(kind, GraphKind::RandomConnected { .. }) { 3 } else { 1 };
    if parts.len() > max_parts {
        return Err(bad("too many fields".into()));
    }
    let seed = extra(2).map_or(Ok(0), |s| s.parse().map_err(|_| bad(format!("bad seed {s:?}"))))?;
    Ok(build_graph(kind, n, seed)?)
}

pub fn mixing_for(graph: &Graph, weights: Weights) -> Result<MixingMatrix> {
    Ok(match weights {
        Weights::Laplacian => laplacian_mixing(graph)?,
        Weights::Uniform => uniform_ring_mixing(graph)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub rho: f64,
    /// `ceil(2 / sqrt(1 - rho))`.
    pub recommended_rounds: usize,
    pub rounds: usize,
    pub rho_tilde: f64,
    pub contraction_bound: f64,
    pub initial_rounds: usize,
    pub min_k0: usize,
}

/// Spectral quantities for `rounds` Chebyshev rounds, or the recommended
/// count when `None`.
pub fn report(mixing: &MixingMatrix, rounds: Option<usize>) -> Result<SpectralReport> {
    let rho = mixing.rho();
    let recommended_rounds = chebyshev_rounds_for_target(rho)?;
    let rounds = rounds.unwrap_or(recommended_rounds);
    let op = ChebyshevOperator::new(mixing.clone(), rounds)?;
    let rho_tilde = op.rho_tilde();
    Ok(SpectralReport {
        rho,
        recommended_rounds,
        rounds,
        rho_tilde,
        contraction_bound: op.contraction_bound(),
        initial_rounds: initial_rounds(rho, rho_tilde)?,
        min_k0: min_k0(rho_tilde),
    })
}

impl std::fmt::Display for SpectralReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rho               {}", self.rho)?;
        writeln!(f, "recommended T     {}", self.recommended_rounds)?;
        writeln!(f, "T                 {}", self.rounds)?;
        writeln!(f, "rho_tilde(T)      {}", self.rho_tilde)?;
        writeln!(f, "contraction bound {}", self.contraction_bound)?;
        writeln!(f, "T0                {}", self.initial_rounds)?;
        write!(f, "min k0            {}", self.min_k0)
    }
}
