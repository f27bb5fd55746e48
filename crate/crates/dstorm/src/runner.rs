//! Multi-seed sweeps.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.resolved.toml
//! status.csv                  run, seed, status, k, tau, message
//! summary_by_iteration.csv
//! summary_by_samples.csv
//! <run>/seed-<seed>.csv        trace
//! <run>/seed-<seed>.checkpoint.json
//! <run>/seed-<seed>.output.txt chosen output iterate, one row per agent
//! ```
//!
//! Seeds run on a pool of threads; results are gathered and written in
//! (run, seed) order, so the output bytes do not depend on the thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dstorm_core::linalg::Matrix;
use dstorm_core::metrics::TraceRecord;
use dstorm_core::optimizer::{RunConfig, Simulation};

use crate::checkpoint::{problem_hash, Checkpoint};
use crate::config::ExperimentSpec;
use crate::error::{HarnessError, Result};
use crate::io;
use crate::trace::{self, SummaryRow};

pub const ENV_OUT_DIR: &str = "DSTORM_OUT_DIR";
pub const ENV_THREADS: &str = "DSTORM_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStatus {
    Ok,
    Diverged(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub run: String,
    pub seed: u64,
    /// Records up to the end of the run, or up to the divergence.
    pub trace: Vec<TraceRecord>,
    pub status: SeedStatus,
    /// Final checkpoint and chosen output, for finished runs.
    pub checkpoint: Option<Checkpoint>,
    pub output: Option<(usize, Matrix)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub outcomes: Vec<SeedOutcome>,
    pub summaries: Vec<(String, Vec<SummaryRow>)>,
}

impl ExperimentReport {
    pub fn diverged(&self) -> impl Iterator<Item = &SeedOutcome> {
        self.outcomes.iter().filter(|o| o.status != SeedStatus::Ok)
    }
}

/// Thread count from `DSTORM_THREADS`, else the available parallelism.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(ENV_THREADS) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs one seed of one run. Divergence is reported in the outcome, other
/// failures are errors.
pub fn run_seed(spec: &ExperimentSpec, run_index: usize, seed: u64) -> Result<SeedOutcome> {
    let named = &spec.runs[run_index];
    let cfg = RunConfig { seed, ..named.config.clone() };
    let mut sim = Simulation::new(&spec.problem, &spec.mixing, cfg.clone())?;
    let mut trace = vec![sim.record()];
    let base = SeedOutcome {
        run: named.name.clone(),
        seed,
        trace: Vec::new(),
        status: SeedStatus::Ok,
        checkpoint: None,
        output: None,
    };
    match sim.run_to(cfg.iterations, &mut trace) {
        Ok(()) => {}
        Err(e @ dstorm_core::Error::Diverged { .. }) => {
            return Ok(SeedOutcome { trace, status: SeedStatus::Diverged(e.to_string()), ..base });
        }
        Err(e) => return Err(e.into()),
    }
    let output = sim.output().map(|(t, z)| (t, z.clone()));
    let checkpoint = Checkpoint {
        config: spec.config.clone(),
        run: named.name.clone(),
        seed,
        problem_hash: problem_hash(&spec.problem, &spec.mixing),
        run_config: cfg,
        state: sim.state(),
    };
    Ok(SeedOutcome { trace, checkpoint: Some(checkpoint), output, ..base })
}

/// Runs every (run, seed) pair on `threads` threads, in memory.
pub fn execute(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentReport> {
    let jobs: Vec<(usize, u64)> = (0..spec.runs.len()).flat_map(|r| spec.seeds().map(move |s| (r, s))).collect();
    let results: Mutex<Vec<Option<Result<SeedOutcome>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(r, s)) = jobs.get(i) else { break };
                let out = run_seed(spec, r, s);
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });
    let outcomes =
        results.into_inner().unwrap().into_iter().map(|o| o.expect("every job ran")).collect::<Result<Vec<_>>>()?;

    let stats = &spec.config.statistics;
    let summaries = spec
        .runs
        .iter()
        .map(|r| {
            let traces: Vec<&[TraceRecord]> = outcomes
                .iter()
                .filter(|o| o.run == r.name && o.status == SeedStatus::Ok)
                .map(|o| o.trace.as_slice())
                .collect();
            (r.name.clone(), trace::summarize(&traces, stats))
        })
        .collect();
    Ok(ExperimentReport { outcomes, summaries })
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| HarnessError::io(p, e))
}

pub fn seed_stem(dir: &Path, run: &str, seed: u64) -> PathBuf {
    dir.join(run).join(format!("seed-{seed}"))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes everything a finished sweep produced into `out_dir`.
pub fn write_report(spec: &ExperimentSpec, report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    let cfg_path = out_dir.join("config.resolved.toml");
    fs::write(&cfg_path, spec.to_toml()).map_err(|e| HarnessError::io(&cfg_path, e))?;
    for r in &spec.runs {
        create_dir(&out_dir.join(&r.name))?;
    }

    let status_path = out_dir.join("status.csv");
    let mut status = csv::Writer::from_path(&status_path).map_err(|e| HarnessError::parse(&status_path, e))?;
    status
        .write_record(["run", "seed", "status", "k", "tau", "message"])
        .map_err(|e| HarnessError::parse(&status_path, e))?;
    for o in &report.outcomes {
        let stem = seed_stem(out_dir, &o.run, o.seed);
        trace::write_trace(&with_suffix(&stem, ".csv"), &o.trace)?;
        if let Some(c) = &o.checkpoint {
            c.save(&with_suffix(&stem, ".checkpoint.json"))?;
        }
        if let Some((_, z)) = &o.output {
            io::write_matrix(&with_suffix(&stem, ".output.txt"), z)?;
        }
        let k = o.trace.last().map_or(0, |r| r.k);
        let tau = o.output.as_ref().map(|(t, _)| t.to_string()).unwrap_or_default();
        let (label, msg) = match &o.status {
            SeedStatus::Ok => ("ok", String::new()),
            SeedStatus::Diverged(m) => ("diverged", m.clone()),
        };
        status
            .write_record([o.run.clone(), o.seed.to_string(), label.into(), k.to_string(), tau, msg])
            .map_err(|e| HarnessError::parse(&status_path, e))?;
    }
    status.flush().map_err(|e| HarnessError::io(&status_path, e))?;

    trace::write_summaries(
        &out_dir.join("summary_by_iteration.csv"),
        &out_dir.join("summary_by_samples.csv"),
        &report.summaries,
        &spec.config.statistics,
    )
}

/// Runs the sweep and writes its files.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, threads: usize) -> Result<ExperimentReport> {
    let report = execute(spec, threads)?;
    write_report(spec, &report, out_dir)?;
    Ok(report)
}
