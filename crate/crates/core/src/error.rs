use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("random graph with {n} nodes and density {density} did not connect after {attempts} attempts")]
    Disconnected { n: usize, density: f64, attempts: usize },

    #[error("invalid mixing matrix: {0}")]
    Mixing(String),

    #[error("eigen-solver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("empty batch for agent {agent}")]
    EmptyBatch { agent: usize },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("iterates diverged at iteration {k} (agent {agent}): {what}")]
    Diverged { k: usize, agent: usize, what: &'static str },

    #[error("invalid state: {0}")]
    State(String),
}
