//! Communication graphs, mixing matrices and multi-round gossip.
//!
//! A [`MixingMatrix`] is a symmetric, row-stochastic matrix supported on the
//! graph's edges plus the diagonal, with
//! `rho = ||W - (1/N) e e^T||_2 < 1`. A [`ChebyshevOperator`] wraps it into a
//! degree-`T` polynomial `W_T` built by the three-term Chebyshev recursion,
//! which keeps row averages fixed while contracting disagreement roughly like
//! `2 (1 - sqrt(1 - rho))^T`.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Tolerance for the symmetry and row-sum checks on a mixing matrix.
pub const MIXING_TOL: f64 = 1e-12;

/// Below this `rho` the mixing matrix already is the exact averager and the
/// Chebyshev recursion is bypassed.
pub const DEGENERATE_RHO: f64 = 1e-12;

/// Retry bound for rejection sampling of connected random graphs.
pub const RANDOM_GRAPH_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    Ring,
    /// Two parallel paths joined by rungs; needs an even node count.
    Ladder,
    /// Erdős–Rényi `G(n, density)`, resampled until connected.
    RandomConnected {
        density: f64,
    },
    Complete,
    Path,
}

/// Undirected simple graph on `0..n`. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list, checking indices, self-loops and
    /// connectivity.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Graph(format!("need at least 2 agents, got {n}")));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Graph(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Graph(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let g = Self { n, edges: set };
        if !g.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_connected(&self) -> bool {
        connected(self.n, &self.edges)
    }

    /// Connected and 2-regular, i.e. a single cycle.
    pub fn is_ring(&self) -> bool {
        self.n >= 3 && self.n_edges() == self.n && (0..self.n).all(|i| self.degree(i) == 2)
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            l[(a, b)] -= 1.0;
            l[(b, a)] -= 1.0;
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
        }
        l
    }
}

fn connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// Builds a connected graph of the requested family. Only the random family
/// consumes `seed`.
pub fn build_graph(kind: GraphKind, n: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Graph(format!("need at least 2 agents, got {n}")));
    }
    match kind {
        GraphKind::Ring => Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))),
        GraphKind::Path => Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))),
        GraphKind::Complete => Graph::from_edges(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))),
        GraphKind::Ladder => {
            if !n.is_multiple_of(2) {
                return Err(Error::Graph(format!("ladder needs an even node count, got {n}")));
            }
            let half = n / 2;
            let rails = (0..half - 1).flat_map(|i| [(i, i + 1), (half + i, half + i + 1)]);
            let rungs = (0..half).map(|i| (i, half + i));
            Graph::from_edges(n, rails.chain(rungs))
        }
        GraphKind::RandomConnected { density } => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::Graph(format!("density must lie in (0, 1], got {density}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..RANDOM_GRAPH_ATTEMPTS {
                let mut edges = BTreeSet::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random::<f64>() < density {
                            edges.insert((i, j));
                        }
                    }
                }
                if connected(n, &edges) {
                    return Ok(Graph { n, edges });
                }
            }
            Err(Error::Disconnected { n, density, attempts: RANDOM_GRAPH_ATTEMPTS })
        }
    }
}

/// A validated mixing matrix together with its `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Matrix,
    rho: f64,
}

impl MixingMatrix {
    /// Validates `w` against `graph` and computes `rho`.
    ///
    /// Checks symmetry and unit row sums to [`MIXING_TOL`], that off-diagonal
    /// entries are positive exactly on edges and zero elsewhere, that the
    /// diagonal is nonnegative, and that `rho < 1`.
    pub fn new(graph: &Graph, w: Matrix) -> Result<Self> {
        let n = graph.n_agents();
        if w.rows() != n || w.cols() != n {
            return Err(Error::Dimension { expected: n, got: w.rows() });
        }
        if !w.is_finite() {
            return Err(Error::Mixing("non-finite entry".into()));
        }
        if w.asymmetry() > MIXING_TOL {
            return Err(Error::Mixing(format!("not symmetric (max gap {:e})", w.asymmetry())));
        }
        for i in 0..n {
            let sum: f64 = w.row(i).iter().sum();
            if (sum - 1.0).abs() > MIXING_TOL {
                return Err(Error::Mixing(format!("row {i} sums to {sum}")));
            }
            if w[(i, i)] < 0.0 {
                return Err(Error::Mixing(format!("negative self-weight at {i}")));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let edge = graph.has_edge(i, j);
                if edge && w[(i, j)] <= 0.0 {
                    return Err(Error::Mixing(format!("edge ({i}, {j}) has weight {}", w[(i, j)])));
                }
                if !edge && w[(i, j)] != 0.0 {
                    return Err(Error::Mixing(format!("non-edge ({i}, {j}) has weight {}", w[(i, j)])));
                }
            }
        }
        let rho = spectral_gap_of(&w)?;
        if !(rho < 1.0) {
            return Err(Error::Mixing(format!("rho = {rho} is not below 1")));
        }
        Ok(Self { w, rho })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn n_agents(&self) -> usize {
        self.w.rows()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// `W = I - L / lambda_max(L)` on the combinatorial Laplacian.
pub fn laplacian_mixing(g: &Graph) -> Result<MixingMatrix> {
    let l = g.laplacian();
    let eig = linalg::symmetric_eigen(&l)?;
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    let gamma = 1.0 / lambda_max;
    let mut w = Matrix::identity(g.n_agents());
    w.add_scaled(-gamma, &l)?;
    // keep exact zeros off the support and an exactly symmetric matrix
    let n = g.n_agents();
    for i in 0..n {
        for j in (i + 1)..n {
            if !g.has_edge(i, j) {
                w[(i, j)] = 0.0;
                w[(j, i)] = 0.0;
            } else {
                w[(j, i)] = w[(i, j)];
            }
        }
    }
    MixingMatrix::new(g, w)
}

/// Self weight and both neighbor weights equal to 1/3 on a ring.
pub fn uniform_ring_mixing(g: &Graph) -> Result<MixingMatrix> {
    if !g.is_ring() {
        return Err(Error::Graph("uniform ring weights need a ring with at least 3 nodes".into()));
    }
    let n = g.n_agents();
    let third = 1.0 / 3.0;
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = third;
    }
    for (a, b) in g.edges() {
        w[(a, b)] = third;
        w[(b, a)] = third;
    }
    MixingMatrix::new(g, w)
}

/// `||W - (1/N) e e^T||_2` by full symmetric eigen-decomposition.
pub fn spectral_gap(w: &MixingMatrix) -> Result<f64> {
    spectral_gap_of(w.matrix())
}

fn spectral_gap_of(w: &Matrix) -> Result<f64> {
    let n = w.rows();
    let mut centered = w.clone();
    let avg = 1.0 / n as f64;
    centered.as_mut_slice().iter_mut().for_each(|v| *v -= avg);
    linalg::symmetric_norm(&centered)
}

/// `ceil(2 / sqrt(1 - rho))`: Chebyshev rounds that give `(1 - rho_tilde)^2 >= 1/2`.
pub fn chebyshev_rounds_for_target(rho: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Mixing(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok(libm::ceil(2.0 / libm::sqrt(1.0 - rho)) as usize)
}

/// `ceil(-2 ln(1 - rho_tilde) / sqrt(1 - rho))`, clamped to at least one round.
pub fn initial_rounds(rho: f64, rho_tilde: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&rho) || !(0.0..1.0).contains(&rho_tilde) {
        return Err(Error::Mixing(format!("rho and rho_tilde must lie in [0, 1), got {rho} and {rho_tilde}")));
    }
    let t0 = libm::ceil(-2.0 * libm::log(1.0 - rho_tilde) / libm::sqrt(1.0 - rho));
    Ok((t0 as usize).max(1))
}

/// Degree-`T` Chebyshev polynomial of a mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevOperator {
    base: MixingMatrix,
    rounds: usize,
    rho_tilde: f64,
}

impl ChebyshevOperator {
    /// Builds the operator and measures its exact `rho_tilde` by applying it to
    /// the identity.
    pub fn new(base: MixingMatrix, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::Mixing("Chebyshev rounds must be at least 1".into()));
        }
        let mut op = Self { base, rounds, rho_tilde: 0.0 };
        let poly = op.mix(&Matrix::identity(op.n_agents()))?;
        op.rho_tilde = spectral_gap_of(&symmetrize(poly))?;
        if !(op.rho_tilde < 1.0) {
            return Err(Error::Mixing(format!("rho_tilde = {} is not below 1", op.rho_tilde)));
        }
        Ok(op)
    }

    pub fn base(&self) -> &MixingMatrix {
        &self.base
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn rho(&self) -> f64 {
        self.base.rho
    }

    pub fn rho_tilde(&self) -> f64 {
        self.rho_tilde
    }

    pub fn n_agents(&self) -> usize {
        self.base.n_agents()
    }

    /// The same base matrix with a different number of rounds.
    pub fn with_rounds(&self, rounds: usize) -> Result<Self> {
        Self::new(self.base.clone(), rounds)
    }

    /// `2 (1 - sqrt(1 - rho))^T`, the a-priori contraction bound.
    pub fn contraction_bound(&self) -> f64 {
        2.0 * libm::pow(1.0 - libm::sqrt(1.0 - self.base.rho), self.rounds as f64)
    }

    /// Applies `W_T` to an `N x p` matrix.
    ///
    /// Runs `B_1 = W B_0`, then
    /// `B_{t+1} = (2 mu_t / (rho mu_{t+1})) W B_t - (mu_{t-1} / mu_{t+1}) B_{t-1}`
    /// with `mu_0 = 1`, `mu_1 = 1/rho`, `mu_{t+1} = (2/rho) mu_t - mu_{t-1}`.
    /// The recursion is carried in the ratio `r_t = mu_{t-1} / mu_t`, which
    /// stays in `(0, 1]` where the raw `mu_t` would overflow for small `rho`.
    pub fn mix(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.n_agents();
        if b.rows() != n {
            return Err(Error::Dimension { expected: n, got: b.rows() });
        }
        let rho = self.base.rho;
        if rho < DEGENERATE_RHO {
            let mean = b.row_mean();
            return Ok(Matrix::repeat_row(n, &mean));
        }
        let w = self.base.matrix();
        let mut prev = b.clone();
        let mut cur = w.matmul(b)?;
        let mut ratio = rho;
        for _ in 1..self.rounds {
            let denom = 2.0 - rho * ratio;
            let next_ratio = rho / denom;
            let a = 2.0 / denom;
            let c = ratio * next_ratio;
            let mut next = w.matmul(&cur)?;
            next.scale(a);
            next.add_scaled(-c, &prev)?;
            prev = cur;
            cur = next;
            ratio = next_ratio;
        }
        Ok(cur)
    }
}

fn symmetrize(mut m: Matrix) -> Matrix {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}
