//! Local objectives `f_i(x) = E_{xi ~ D_i} f_i(x; xi)` over per-agent data shards.
//!
//! `D_i` is the empirical distribution of agent `i`'s shard, so the full
//! local gradient is the shard average and a mini-batch gradient is the
//! average over ids drawn uniformly with replacement. Two families ship:
//!
//! * quadratic: `f_i(x; s) = 1/2 ||x - s||^2`, samples scattered around a
//!   per-agent center `c_i` (the shard mean). `L = 1`.
//! * logistic: `f_i(x; (a, b)) = log(1 + exp(a.x)) - b a.x` with `b in {0, 1}`,
//!   synthetic data labelled by a planted sparse weight vector.
//!
//! The global smooth part is the average of agent averages,
//! `f = (1/N) sum_i f_i`, and `phi = f + r`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, axpy, dot, Matrix};
use crate::proximal::Regularizer;
use crate::{Error, Result};

/// Oracle access to the per-sample losses and gradients of every agent.
///
/// [`ProblemInstance`] is the built-in implementation; the optimizer and the
/// metrics are generic over this trait so tests can wrap an instance and
/// count oracle calls.
pub trait LocalObjective {
    fn n_agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn shard_len(&self, agent: usize) -> usize;
    /// Adds `scale * grad f_i(x; xi_sample)` into `out`.
    fn add_sample_gradient(&self, agent: usize, sample: usize, x: &[f64], scale: f64, out: &mut [f64]);
    fn sample_loss(&self, agent: usize, sample: usize, x: &[f64]) -> f64;
    fn regularizer(&self) -> Regularizer;
    /// Smoothness constant `L` used by schedules and metrics.
    fn smoothness(&self) -> f64;
    /// Bound `sigma` on the per-sample gradient standard deviation.
    fn noise_sigma(&self) -> f64;
    /// Classification accuracy of a consensus point, when meaningful.
    fn accuracy(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ObjectiveKind {
    Quadratic,
    Logistic,
}

/// One agent's data. `labels` is empty for the quadratic family.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub features: Matrix,
    pub labels: Vec<f64>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labelled data before it is split across agents. Labels are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
}

impl Dataset {
    /// Accepts labels in `{0, 1}` or `{-1, 1}` and stores them as `{0, 1}`.
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Dimension { expected: features.rows(), got: labels.len() });
        }
        let labels = labels
            .into_iter()
            .map(|b| {
                if b == 1.0 {
                    Ok(1.0)
                } else if b == 0.0 || b == -1.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Problem(format!("label {b} is not binary")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if !features.is_finite() {
            return Err(Error::Problem("non-finite feature".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Which smoothness constant an instance reports as `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SmoothnessBound {
    /// Lipschitz constant of each local gradient `grad f_i`; for the logistic
    /// loss `max_i lambda_max(A_i^T A_i) / (4 M_i)`.
    #[default]
    Gram,
    /// Mean-squared constant:
    /// `E ||grad f_i(a; xi) - grad f_i(b; xi)||^2 <= L^2 ||a - b||^2`.
    MeanSquared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    kind: ObjectiveKind,
    dim: usize,
    shards: Vec<Shard>,
    regularizer: Regularizer,
    bound: SmoothnessBound,
    gram_smoothness: f64,
    mean_squared_smoothness: f64,
    noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams {
    pub n_agents: usize,
    pub dim: usize,
    pub samples_per_agent: usize,
    /// Spread of the agent centers around a shared base point.
    pub heterogeneity: f64,
    /// Spread of the samples around their agent's center.
    pub noise: f64,
    pub seed: u64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self { n_agents: 8, dim: 10, samples_per_agent: 64, heterogeneity: 1.0, noise: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub n_agents: usize,
    pub n_samples: usize,
    pub dim: usize,
    /// Fraction of planted weights that are nonzero.
    pub sparsity: f64,
    /// Standard deviation of each feature. Small scales keep gradients of the
    /// irrelevant coordinates below a `1e-4` l1 strength, so the composite
    /// solution is sparse.
    pub feature_scale: f64,
    /// Standard deviation of the planted margin `a . w*`.
    pub margin_scale: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { n_agents: 8, n_samples: 4000, dim: 50, sparsity: 0.2, feature_scale: 0.02, margin_scale: 3.0, seed: 0 }
    }
}

/// Synthetic logistic data together with the planted weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedLogistic {
    pub dataset: Dataset,
    pub planted: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl ProblemInstance {
    /// Quadratic instance with one sample matrix per agent; each agent's
    /// center is the mean of its rows.
    pub fn quadratic_from_samples(shards: Vec<Matrix>, regularizer: Regularizer) -> Result<Self> {
        let dim = shards.first().map_or(0, Matrix::cols);
        if shards.is_empty() || dim == 0 {
            return Err(Error::Problem("need at least one agent and one coordinate".into()));
        }
        let mut var_max = 0.0f64;
        for (i, s) in shards.iter().enumerate() {
            if s.rows() == 0 {
                return Err(Error::Problem(format!("agent {i} has an empty shard")));
            }
            if s.cols() != dim {
                return Err(Error::Dimension { expected: dim, got: s.cols() });
            }
            let var = s.deviation_from_mean().frobenius_sq() / s.rows() as f64;
            var_max = var_max.max(var);
        }
        let shards = shards.into_iter().map(|features| Shard { features, labels: Vec::new() }).collect();
        Ok(Self {
            kind: ObjectiveKind::Quadratic,
            dim,
            shards,
            regularizer,
            bound: SmoothnessBound::Gram,
            gram_smoothness: 1.0,
            mean_squared_smoothness: 1.0,
            noise_sigma: libm::sqrt(var_max),
        })
    }

    /// Random quadratic instance. Agent centers are `b + heterogeneity * g_i`
    /// around a shared base point `b`; samples are re-centered so each shard
    /// mean equals its agent center exactly.
    pub fn quadratic(params: &QuadraticParams, regularizer: Regularizer) -> Result<Self> {
        let QuadraticParams { n_agents, dim, samples_per_agent, heterogeneity, noise, seed } = *params;
        if n_agents == 0 || dim == 0 || samples_per_agent == 0 {
            return Err(Error::Problem("agents, dim and samples per agent must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
        let mut shards = Vec::with_capacity(n_agents);
        for _ in 0..n_agents {
            let center: Vec<f64> = base.iter().map(|b| b + heterogeneity * normal(&mut rng)).collect();
            let mut s = Matrix::zeros(samples_per_agent, dim);
            for v in s.as_mut_slice() {
                *v = noise * normal(&mut rng);
            }
            let mut s = s.deviation_from_mean();
            for j in 0..samples_per_agent {
                axpy(1.0, &center, s.row_mut(j));
            }
            shards.push(s);
        }
        Self::quadratic_from_samples(shards, regularizer)
    }

    /// Synthetic sparse logistic-regression data: Gaussian features, a planted
    /// weight vector with `ceil(sparsity * dim)` nonzeros scaled so the margin
    /// `a . w*` has standard deviation `margin_scale`, labels drawn from the
    /// logistic model.
    pub fn planted_logistic(params: &LogisticParams) -> Result<PlantedLogistic> {
        let LogisticParams { n_samples, dim, sparsity, feature_scale, margin_scale, seed, .. } = *params;
        if dim == 0 || n_samples == 0 {
            return Err(Error::Problem("dim and sample count must be positive".into()));
        }
        if !(sparsity > 0.0 && sparsity <= 1.0) {
            return Err(Error::Problem(format!("sparsity must lie in (0, 1], got {sparsity}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nnz = (libm::ceil(sparsity * dim as f64) as usize).clamp(1, dim);
        let mut coords: Vec<usize> = (0..dim).collect();
        coords.shuffle(&mut rng);
        let mut planted = vec![0.0; dim];
        for &j in &coords[..nnz] {
            planted[j] = normal(&mut rng);
        }
        let w_norm = linalg::norm(&planted);
        let factor = margin_scale / (feature_scale * w_norm.max(f64::MIN_POSITIVE));
        planted.iter_mut().for_each(|w| *w *= factor);

        let mut features = Matrix::zeros(n_samples, dim);
        let mut labels = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let row = features.row_mut(i);
            for v in row.iter_mut() {
                *v = feature_scale * normal(&mut rng);
            }
            let p = sigmoid(dot(row, &planted));
            labels.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        }
        Ok(PlantedLogistic { dataset: Dataset { features, labels }, planted })
    }

    /// Logistic instance from labelled data, shuffled with `split_seed` and
    /// dealt into `n_agents` shards whose sizes differ by at most one.
    pub fn logistic_from_dataset(
        data: &Dataset,
        n_agents: usize,
        split_seed: u64,
        regularizer: Regularizer,
    ) -> Result<Self> {
        let n = data.len();
        if n_agents == 0 || n < n_agents {
            return Err(Error::Problem(format!("{n} samples cannot fill {n_agents} shards")));
        }
        let ones = data.labels.iter().filter(|&&b| b == 1.0).count();
        if ones == 0 || ones == n {
            return Err(Error::Problem("all labels are equal".into()));
        }
        let dim = data.features.cols();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));

        let mut shards = Vec::with_capacity(n_agents);
        let (base, extra) = (n / n_agents, n % n_agents);
        let mut cursor = 0;
        for i in 0..n_agents {
            let len = base + usize::from(i < extra);
            let ids = &order[cursor..cursor + len];
            cursor += len;
            let mut features = Matrix::zeros(len, dim);
            let mut labels = Vec::with_capacity(len);
            for (r, &id) in ids.iter().enumerate() {
                features.row_mut(r).copy_from_slice(data.features.row(id));
                labels.push(data.labels[id]);
            }
            shards.push(Shard { features, labels });
        }
        let c = logistic_constants(&shards)?;
        Ok(Self {
            kind: ObjectiveKind::Logistic,
            dim,
            shards,
            regularizer,
            bound: SmoothnessBound::Gram,
            gram_smoothness: c.gram,
            mean_squared_smoothness: c.mean_squared,
            noise_sigma: c.sigma,
        })
    }

    /// Planted sparse logistic regression split over `params.n_agents` agents.
    pub fn logistic_l1(params: &LogisticParams, lambda: f64) -> Result<Self> {
        if params.n_samples < params.n_agents {
            return Err(Error::Problem("fewer samples than agents".into()));
        }
        let planted = Self::planted_logistic(params)?;
        Self::logistic_from_dataset(
            &planted.dataset,
            params.n_agents,
            params.seed.wrapping_add(1),
            Regularizer::l1(lambda)?,
        )
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    /// Total number of samples over all agents.
    pub fn total_samples(&self) -> usize {
        self.shards.iter().map(Shard::len).sum()
    }

    /// The quadratic agent center `c_i` (the shard mean).
    pub fn center(&self, agent: usize) -> Vec<f64> {
        self.shards[agent].features.row_mean()
    }

    /// A copy with a different regularizer.
    pub fn with_regularizer(&self, regularizer: Regularizer) -> Self {
        Self { regularizer, ..self.clone() }
    }

    /// Selects which constant [`LocalObjective::smoothness`] reports.
    pub fn with_smoothness_bound(mut self, bound: SmoothnessBound) -> Self {
        self.bound = bound;
        self
    }

    pub fn smoothness_bound(&self) -> SmoothnessBound {
        self.bound
    }

    pub fn gram_smoothness(&self) -> f64 {
        self.gram_smoothness
    }

    pub fn mean_squared_smoothness(&self) -> f64 {
        self.mean_squared_smoothness
    }
}

struct LogisticConstants {
    gram: f64,
    mean_squared: f64,
    sigma: f64,
}

/// Smoothness and variance constants of the logistic loss.
///
/// With `s' <= 1/4`, each local gradient is `lambda_max(E_i[a a^T]) / 4`
/// Lipschitz. Per sample, `grad f(x; a) - grad f(y; a) = a (s(a.x) - s(a.y))`,
/// so `E ||.||^2 <= (1/16) (x-y)^T E[||a||^2 a a^T] (x-y)` and the mean-squared
/// constant is `(1/4) sqrt(max_i lambda_max(E_i[||a||^2 a a^T]))`. The
/// per-sample gradient has norm at most `||a||`, so
/// `sigma^2 = max_i E_i ||a||^2`.
fn logistic_constants(shards: &[Shard]) -> Result<LogisticConstants> {
    let mut gram = 0.0f64;
    let mut ms_sq = 0.0f64;
    let mut sigma_sq = 0.0f64;
    for s in shards {
        let p = s.features.cols();
        let m = s.len() as f64;
        let mut second = Matrix::zeros(p, p);
        let mut fourth = Matrix::zeros(p, p);
        let mut mean_norm_sq = 0.0;
        for a in s.features.row_iter() {
            let nsq = linalg::norm_sq(a);
            mean_norm_sq += nsq / m;
            for j in 0..p {
                let w = a[j] / m;
                if w != 0.0 {
                    axpy(w, a, second.row_mut(j));
                    axpy(nsq * w, a, fourth.row_mut(j));
                }
            }
        }
        let top =
            |mat: &Matrix| -> Result<f64> { Ok(linalg::symmetric_eigen(mat)?.values.last().copied().unwrap_or(0.0)) };
        gram = gram.max(0.25 * top(&second)?);
        ms_sq = ms_sq.max(top(&fourth)?);
        sigma_sq = sigma_sq.max(mean_norm_sq);
    }
    if !(gram > 0.0) {
        return Err(Error::Problem("all features are zero".into()));
    }
    Ok(LogisticConstants { gram, mean_squared: 0.25 * libm::sqrt(ms_sq), sigma: libm::sqrt(sigma_sq) })
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

impl LocalObjective for ProblemInstance {
    fn n_agents(&self) -> usize {
        self.shards.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn shard_len(&self, agent: usize) -> usize {
        self.shards[agent].len()
    }

    fn add_sample_gradient(&self, agent: usize, sample: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let shard = &self.shards[agent];
        let a = shard.features.row(sample);
        match self.kind {
            ObjectiveKind::Quadratic => {
                for ((o, xi), si) in out.iter_mut().zip(x).zip(a) {
                    *o += scale * (xi - si);
                }
            }
            ObjectiveKind::Logistic => {
                let residual = sigmoid(dot(a, x)) - shard.labels[sample];
                axpy(scale * residual, a, out);
            }
        }
    }

    fn sample_loss(&self, agent: usize, sample: usize, x: &[f64]) -> f64 {
        let shard = &self.shards[agent];
        let a = shard.features.row(sample);
        match self.kind {
            ObjectiveKind::Quadratic => 0.5 * linalg::dist_sq(x, a),
            ObjectiveKind::Logistic => {
                let t = dot(a, x);
                softplus(t) - shard.labels[sample] * t
            }
        }
    }

    fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    fn smoothness(&self) -> f64 {
        match self.bound {
            SmoothnessBound::Gram => self.gram_smoothness,
            SmoothnessBound::MeanSquared => self.mean_squared_smoothness,
        }
    }

    fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    fn accuracy(&self, x: &[f64]) -> Option<f64> {
        accuracy(self, x)
    }
}

/// Mini-batch size: the whole shard, or `m` ids drawn with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BatchSize {
    Full,
    Sample(usize),
}

impl BatchSize {
    /// Number of gradient evaluations per point for a shard of `shard_len`.
    pub fn count(&self, shard_len: usize) -> usize {
        match *self {
            Self::Full => shard_len,
            Self::Sample(m) => m,
        }
    }
}

/// Sample ids from one agent's shard. Ids may repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub agent: usize,
    pub ids: Vec<usize>,
}

impl Batch {
    pub fn full<O: LocalObjective + ?Sized>(problem: &O, agent: usize) -> Self {
        Self { agent, ids: (0..problem.shard_len(agent)).collect() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// `m` ids drawn uniformly with replacement from `agent`'s shard using that
/// agent's own stream.
pub fn sample_batch<O: LocalObjective + ?Sized, R: Rng + ?Sized>(
    problem: &O,
    agent: usize,
    m: usize,
    rng: &mut R,
) -> Batch {
    let len = problem.shard_len(agent);
    Batch { agent, ids: (0..m).map(|_| rng.random_range(0..len)).collect() }
}

pub fn draw_batch<O: LocalObjective + ?Sized, R: Rng + ?Sized>(
    problem: &O,
    agent: usize,
    size: BatchSize,
    rng: &mut R,
) -> Batch {
    match size {
        BatchSize::Full => Batch::full(problem, agent),
        BatchSize::Sample(m) => sample_batch(problem, agent, m, rng),
    }
}

/// Exact local gradient: the average over the agent's whole shard.
pub fn full_gradient<O: LocalObjective + ?Sized>(problem: &O, agent: usize, x: &[f64]) -> Vec<f64> {
    let len = problem.shard_len(agent);
    let mut g = vec![0.0; problem.dim()];
    let w = 1.0 / len as f64;
    for s in 0..len {
        problem.add_sample_gradient(agent, s, x, w, &mut g);
    }
    g
}

/// Mean gradient over the batch's samples.
pub fn stochastic_gradient<O: LocalObjective + ?Sized>(
    problem: &O,
    agent: usize,
    x: &[f64],
    batch: &Batch,
) -> Result<Vec<f64>> {
    let mut g = vec![0.0; problem.dim()];
    stochastic_gradient_into(problem, agent, x, batch, &mut g)?;
    Ok(g)
}

pub fn stochastic_gradient_into<O: LocalObjective + ?Sized>(
    problem: &O,
    agent: usize,
    x: &[f64],
    batch: &Batch,
    out: &mut [f64],
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch { agent });
    }
    if batch.agent != agent {
        return Err(Error::Problem(format!("batch of agent {} used for agent {agent}", batch.agent)));
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    let w = 1.0 / batch.len() as f64;
    for &s in &batch.ids {
        problem.add_sample_gradient(agent, s, x, w, out);
    }
    Ok(())
}

/// `grad f(x) = (1/N) sum_i grad f_i(x)`.
pub fn global_gradient<O: LocalObjective + ?Sized>(problem: &O, x: &[f64]) -> Vec<f64> {
    let n = problem.n_agents();
    let mut g = vec![0.0; problem.dim()];
    for i in 0..n {
        axpy(1.0 / n as f64, &full_gradient(problem, i, x), &mut g);
    }
    g
}

/// `f_i(x)`: average sample loss over the agent's shard.
pub fn local_loss<O: LocalObjective + ?Sized>(problem: &O, agent: usize, x: &[f64]) -> f64 {
    let len = problem.shard_len(agent);
    (0..len).map(|s| problem.sample_loss(agent, s, x)).sum::<f64>() / len as f64
}

/// `f(x) = (1/N) sum_i f_i(x)`.
pub fn smooth_loss<O: LocalObjective + ?Sized>(problem: &O, x: &[f64]) -> f64 {
    let n = problem.n_agents();
    (0..n).map(|i| local_loss(problem, i, x)).sum::<f64>() / n as f64
}

/// `phi(x) = f(x) + r(x)`.
pub fn objective<O: LocalObjective + ?Sized>(problem: &O, x: &[f64]) -> f64 {
    smooth_loss(problem, x) + problem.regularizer().value(x)
}

/// Fraction of samples a linear classifier `x` labels correctly, for the
/// logistic family.
pub fn accuracy(problem: &ProblemInstance, x: &[f64]) -> Option<f64> {
    if problem.kind != ObjectiveKind::Logistic {
        return None;
    }
    let mut correct = 0usize;
    for s in &problem.shards {
        for (a, &b) in s.features.row_iter().zip(&s.labels) {
            let predicted = if dot(a, x) > 0.0 { 1.0 } else { 0.0 };
            correct += usize::from(predicted == b);
        }
    }
    Some(correct as f64 / problem.total_samples() as f64)
}
