//! Synchronous-round execution of a run.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::estimator::estimate_vtilde;
use super::{Method, RunConfig, SelectionState, Variant, DIVERGENCE_LIMIT};
use crate::linalg::Matrix;
use crate::metrics::{self, TraceRecord};
use crate::problems::{self, draw_batch, BatchSize, LocalObjective};
use crate::proximal::prox_step_into;
use crate::rng::{self, StreamRng, StreamState};
use crate::topology::{ChebyshevOperator, MixingMatrix};
use crate::{Error, Result};

/// Running totals. `samples` and `grad_evals` are summed over agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counters {
    pub samples: u64,
    pub grad_evals: u64,
    pub comm_rounds: u64,
}

/// Everything needed to continue a run bit for bit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimState {
    pub k: usize,
    pub x: Matrix,
    /// Recursive-momentum estimates for the main method, last stochastic
    /// gradients for DSGT.
    pub d: Matrix,
    pub y: Matrix,
    pub snapshot_x: Option<Matrix>,
    pub snapshot_grad: Option<Matrix>,
    pub counters: Counters,
    pub selection: SelectionState,
    pub run_rng: StreamState,
    pub agent_rngs: Vec<StreamState>,
}

pub struct Simulation<'a, O: LocalObjective + ?Sized> {
    problem: &'a O,
    cfg: RunConfig,
    mixer: ChebyshevOperator,
    k: usize,
    x: Matrix,
    d: Matrix,
    y: Matrix,
    snapshot_x: Option<Matrix>,
    snapshot_grad: Option<Matrix>,
    counters: Counters,
    selection: SelectionState,
    run_rng: StreamRng,
    agent_rngs: Vec<StreamRng>,
    total_samples: usize,
}

/// Trace, chosen output iterate and final state of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub tau: usize,
    pub output: Matrix,
    pub state: SimState,
}

/// Initializes and runs `cfg.iterations` iterations.
pub fn run<O: LocalObjective + ?Sized>(problem: &O, mixing: &MixingMatrix, cfg: &RunConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(problem, mixing, cfg.clone())?;
    let mut trace = vec![sim.record()];
    sim.run_to(cfg.iterations, &mut trace)?;
    let (tau, output) = sim.output().ok_or_else(|| Error::State("no output iterate selected".into()))?;
    let output = output.clone();
    Ok(RunOutput { trace, tau, output, state: sim.state() })
}

fn check_finite(m: &Matrix, k: usize, what: &'static str) -> Result<()> {
    for i in 0..m.rows() {
        if m.row(i).iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Diverged { k, agent: i, what });
        }
    }
    Ok(())
}

impl<'a, O: LocalObjective + ?Sized> Simulation<'a, O> {
    /// Draws the shared starting point, the initial gradient estimates and,
    /// for v1-SVRG, the first snapshot; then forms `Y0 = W_{T0}(D0)`.
    pub fn new(problem: &'a O, mixing: &MixingMatrix, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let n = problem.n_agents();
        let p = problem.dim();
        if mixing.n_agents() != n {
            return Err(Error::Dimension { expected: n, got: mixing.n_agents() });
        }
        let mixer = ChebyshevOperator::new(mixing.clone(), cfg.rounds)?;
        let initial = ChebyshevOperator::new(mixing.clone(), cfg.initial_rounds)?;

        let mut run_rng = rng::run_stream(cfg.seed);
        let x0: Vec<f64> = (0..p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut run_rng);
                cfg.init_scale * z
            })
            .collect();
        let x = Matrix::repeat_row(n, &x0);
        let mut agent_rngs: Vec<StreamRng> = (0..n).map(|i| rng::agent_stream(cfg.seed, i)).collect();
        let mut counters = Counters::default();

        let initial_batch = match cfg.method {
            Method::Deepstorm(e) => e.initial_batch,
            Method::Dsgt { initial_batch, .. } => initial_batch,
        };
        let mut d = Matrix::zeros(n, p);
        for (i, rng) in agent_rngs.iter_mut().enumerate() {
            let b = draw_batch(problem, i, initial_batch, rng);
            problems::stochastic_gradient_into(problem, i, &x0, &b, d.row_mut(i))?;
            counters.samples += b.len() as u64;
            counters.grad_evals += b.len() as u64;
        }

        let mut snapshot_x = None;
        let mut snapshot_grad = None;
        if let Method::Deepstorm(e) = cfg.method {
            if let Variant::V1Svrg { snapshot_batch, .. } = e.variant {
                let mut g = Matrix::zeros(n, p);
                take_snapshot(problem, &x, snapshot_batch, &mut agent_rngs, &mut g, &mut counters)?;
                snapshot_x = Some(x.clone());
                snapshot_grad = Some(g);
            }
        }

        let y = initial.mix(&d)?;
        counters.comm_rounds += cfg.initial_rounds as u64;
        check_finite(&d, 0, "initial gradient")?;
        check_finite(&y, 0, "initial tracking variable")?;

        Ok(Self {
            problem,
            total_samples: total_samples(problem),
            cfg,
            mixer,
            k: 0,
            x,
            d,
            y,
            snapshot_x,
            snapshot_grad,
            counters,
            selection: SelectionState::default(),
            run_rng,
            agent_rngs,
        })
    }

    /// Rebuilds a simulation from a saved state.
    pub fn from_state(problem: &'a O, mixing: &MixingMatrix, cfg: RunConfig, state: SimState) -> Result<Self> {
        cfg.validate()?;
        let (n, p) = (problem.n_agents(), problem.dim());
        for (name, m) in [("x", &state.x), ("d", &state.d), ("y", &state.y)] {
            if m.rows() != n || m.cols() != p {
                return Err(Error::State(format!("{name} is {}x{}, expected {n}x{p}", m.rows(), m.cols())));
            }
        }
        if state.agent_rngs.len() != n {
            return Err(Error::State(format!("{} agent streams for {n} agents", state.agent_rngs.len())));
        }
        let svrg = matches!(cfg.method, Method::Deepstorm(e) if matches!(e.variant, Variant::V1Svrg { .. }));
        if svrg != (state.snapshot_x.is_some() && state.snapshot_grad.is_some()) {
            return Err(Error::State("snapshot presence does not match the estimator".into()));
        }
        if state.k > 0 && state.selection.chosen.is_none() {
            return Err(Error::State("missing output iterate".into()));
        }
        let mixer = ChebyshevOperator::new(mixing.clone(), cfg.rounds)?;
        Ok(Self {
            problem,
            total_samples: total_samples(problem),
            cfg,
            mixer,
            k: state.k,
            x: state.x,
            d: state.d,
            y: state.y,
            snapshot_x: state.snapshot_x,
            snapshot_grad: state.snapshot_grad,
            counters: state.counters,
            selection: state.selection,
            run_rng: state.run_rng.restore(),
            agent_rngs: state.agent_rngs.iter().map(StreamState::restore).collect(),
        })
    }

    pub fn state(&self) -> SimState {
        SimState {
            k: self.k,
            x: self.x.clone(),
            d: self.d.clone(),
            y: self.y.clone(),
            snapshot_x: self.snapshot_x.clone(),
            snapshot_grad: self.snapshot_grad.clone(),
            counters: self.counters,
            selection: self.selection.clone(),
            run_rng: StreamState::capture(&self.run_rng),
            agent_rngs: self.agent_rngs.iter().map(StreamState::capture).collect(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn snapshot(&self) -> Option<(&Matrix, &Matrix)> {
        self.snapshot_x.as_ref().zip(self.snapshot_grad.as_ref())
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn mixer(&self) -> &ChebyshevOperator {
        &self.mixer
    }

    /// The output iterate chosen so far, `(tau, Z^{(tau)})`.
    pub fn output(&self) -> Option<(usize, &Matrix)> {
        self.selection.tau.zip(self.selection.chosen.as_ref())
    }

    /// Metrics of the current iterate `X^{(k)}`.
    pub fn record(&self) -> TraceRecord {
        let x = &self.x;
        let mean = x.row_mean();
        let eta = self.cfg.schedule.alpha(self.k);
        TraceRecord {
            k: self.k,
            loss: problems::objective(self.problem, &mean),
            stationarity_def2: metrics::stationarity_def2(x, self.problem, eta),
            stationarity_exp: metrics::stationarity_experiment(x, self.problem),
            consensus: metrics::consensus(x),
            sparsity_pct: metrics::sparsity_pct(x),
            samples: self.counters.samples,
            grad_evals: self.counters.grad_evals,
            comm_rounds: self.counters.comm_rounds,
            passes: self.counters.samples as f64 / self.total_samples as f64,
            accuracy: self.problem.accuracy(&mean),
        }
    }

    /// Steps until iteration `k_end`, appending a record whenever `k` is a
    /// multiple of `record_every` or equals `k_end`.
    pub fn run_to(&mut self, k_end: usize, trace: &mut Vec<TraceRecord>) -> Result<()> {
        while self.k < k_end {
            self.step()?;
            if self.k.is_multiple_of(self.cfg.record_every) || self.k == k_end {
                trace.push(self.record());
            }
        }
        Ok(())
    }

    /// One synchronous iteration `k -> k + 1`.
    pub fn step(&mut self) -> Result<()> {
        match self.cfg.method {
            Method::Deepstorm(_) => self.step_deepstorm(),
            Method::Dsgt { batch, .. } => self.step_dsgt(batch),
        }
    }

    fn mix(&mut self, b: &Matrix) -> Result<Matrix> {
        self.counters.comm_rounds += self.cfg.rounds as u64;
        self.mixer.mix(b)
    }

    fn offer(&mut self, z: &Matrix, alpha: f64) {
        let w = self.cfg.selection.weight(alpha);
        self.selection.offer(self.k, z, w, &mut self.run_rng);
    }

    fn step_deepstorm(&mut self) -> Result<()> {
        let Method::Deepstorm(est) = self.cfg.method else { unreachable!() };
        let problem = self.problem;
        let k = self.k;
        let (n, p) = (problem.n_agents(), problem.dim());
        let (alpha, beta) = self.cfg.schedule.values(k)?;
        let r = problem.regularizer();

        let z = self.mix(&self.x.clone())?;
        self.offer(&z, alpha);
        let mut x_next = Matrix::zeros(n, p);
        for i in 0..n {
            prox_step_into(z.row(i), self.y.row(i), alpha, &r, x_next.row_mut(i));
        }

        if let Variant::V1Svrg { period, snapshot_batch } = est.variant {
            if k > 0 && k.is_multiple_of(period) {
                let mut g = Matrix::zeros(n, p);
                take_snapshot(problem, &self.x, snapshot_batch, &mut self.agent_rngs, &mut g, &mut self.counters)?;
                self.snapshot_x = Some(self.x.clone());
                self.snapshot_grad = Some(g);
            }
        }

        let mut d_next = Matrix::zeros(n, p);
        let mut v = vec![0.0; p];
        let mut u = vec![0.0; p];
        for i in 0..n {
            let rng = &mut self.agent_rngs[i];
            let b = draw_batch(problem, i, est.batch, rng);
            problems::stochastic_gradient_into(problem, i, x_next.row(i), &b, &mut v)?;
            problems::stochastic_gradient_into(problem, i, self.x.row(i), &b, &mut u)?;
            self.counters.samples += b.len() as u64;
            self.counters.grad_evals += 2 * b.len() as u64;
            let snapshot =
                self.snapshot_x.as_ref().zip(self.snapshot_grad.as_ref()).map(|(sx, sg)| (sx.row(i), sg.row(i)));
            let vt = estimate_vtilde(problem, est.variant, est.batch, i, x_next.row(i), &v, snapshot, rng)?;
            self.counters.samples += vt.samples as u64;
            self.counters.grad_evals += vt.grad_evals as u64;
            let vt = vt.value;
            let di = self.d.row(i);
            for (j, out) in d_next.row_mut(i).iter_mut().enumerate() {
                *out = (1.0 - beta) * (di[j] + v[j] - u[j]) + beta * vt[j];
            }
        }

        let mut shifted = self.y.clone();
        shifted.add_scaled(1.0, &d_next)?;
        shifted.add_scaled(-1.0, &self.d)?;
        let y_next = self.mix(&shifted)?;

        let k1 = k + 1;
        check_finite(&x_next, k1, "x")?;
        check_finite(&d_next, k1, "d")?;
        check_finite(&y_next, k1, "y")?;
        self.x = x_next;
        self.d = d_next;
        self.y = y_next;
        self.k = k1;
        Ok(())
    }

    fn step_dsgt(&mut self, batch: BatchSize) -> Result<()> {
        let problem = self.problem;
        let k = self.k;
        let (n, p) = (problem.n_agents(), problem.dim());
        let alpha = self.cfg.schedule.alpha(k);

        let mut x_next = self.mix(&self.x.clone())?;
        self.offer(&x_next, alpha);
        x_next.add_scaled(-alpha, &self.y)?;

        let mut g_next = Matrix::zeros(n, p);
        for i in 0..n {
            let b = draw_batch(problem, i, batch, &mut self.agent_rngs[i]);
            problems::stochastic_gradient_into(problem, i, x_next.row(i), &b, g_next.row_mut(i))?;
            self.counters.samples += b.len() as u64;
            self.counters.grad_evals += b.len() as u64;
        }

        let mut shifted = self.y.clone();
        shifted.add_scaled(1.0, &g_next)?;
        shifted.add_scaled(-1.0, &self.d)?;
        let y_next = self.mix(&shifted)?;

        let k1 = k + 1;
        check_finite(&x_next, k1, "x")?;
        check_finite(&y_next, k1, "y")?;
        self.x = x_next;
        self.d = g_next;
        self.y = y_next;
        self.k = k1;
        Ok(())
    }
}

fn take_snapshot<O: LocalObjective + ?Sized>(
    problem: &O,
    x: &Matrix,
    size: BatchSize,
    rngs: &mut [StreamRng],
    out: &mut Matrix,
    counters: &mut Counters,
) -> Result<()> {
    for (i, rng) in rngs.iter_mut().enumerate() {
        let b = draw_batch(problem, i, size, rng);
        problems::stochastic_gradient_into(problem, i, x.row(i), &b, out.row_mut(i))?;
        counters.samples += b.len() as u64;
        counters.grad_evals += b.len() as u64;
    }
    Ok(())
}

fn total_samples<O: LocalObjective + ?Sized>(problem: &O) -> usize {
    (0..problem.n_agents()).map(|i| problem.shard_len(i)).sum()
}
