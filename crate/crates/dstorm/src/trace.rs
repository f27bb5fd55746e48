//! Trace CSVs and across-seed summaries.
//!
//! Trace columns, in order: `k, loss, stationarity_def2, stationarity_exp,
//! consensus, sparsity_pct, samples, grad_evals, comm_rounds, passes,
//! accuracy`. `accuracy` is empty for problems without one. Floats use the
//! shortest representation that parses back to the same bits.
//!
//! Summary rows carry the counters of a recorded iteration followed by one
//! `<metric>_<stat>` column per metric and requested statistic. `std` is the
//! sample standard deviation (0 for a single seed). Seeds that diverged are
//! left out; `n_seeds` counts the seeds that entered each row.

use std::fs::File;
use std::path::Path;

use dstorm_core::metrics::TraceRecord;

use crate::config::Statistic;
use crate::error::{HarnessError, Result};

pub const TRACE_COLUMNS: [&str; 11] = [
    "k",
    "loss",
    "stationarity_def2",
    "stationarity_exp",
    "consensus",
    "sparsity_pct",
    "samples",
    "grad_evals",
    "comm_rounds",
    "passes",
    "accuracy",
];

/// Metrics summarized across seeds.
pub const SUMMARY_METRICS: [&str; 6] =
    ["loss", "stationarity_def2", "stationarity_exp", "consensus", "sparsity_pct", "accuracy"];

fn metric(r: &TraceRecord, name: &str) -> Option<f64> {
    match name {
        "loss" => Some(r.loss),
        "stationarity_def2" => Some(r.stationarity_def2),
        "stationarity_exp" => Some(r.stationarity_exp),
        "consensus" => Some(r.consensus),
        "sparsity_pct" => Some(r.sparsity_pct),
        "accuracy" => r.accuracy,
        _ => None,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::parse(path, format!("{other:?}")),
    }
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRACE_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in trace {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            r.k.to_string(),
            r.loss.to_string(),
            r.stationarity_def2.to_string(),
            r.stationarity_exp.to_string(),
            r.consensus.to_string(),
            r.sparsity_pct.to_string(),
            r.samples.to_string(),
            r.grad_evals.to_string(),
            r.comm_rounds.to_string(),
            r.passes.to_string(),
            acc,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(HarnessError::parse(path, "trace header does not match the expected columns"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |col: &str| HarnessError::parse(path, format!("bad value in column {col}"));
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRACE_COLUMNS[i]));
        let u = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(TRACE_COLUMNS[i]));
        out.push(TraceRecord {
            k: rec[0].parse().map_err(|_| bad("k"))?,
            loss: f(1)?,
            stationarity_def2: f(2)?,
            stationarity_exp: f(3)?,
            consensus: f(4)?,
            sparsity_pct: f(5)?,
            samples: u(6)?,
            grad_evals: u(7)?,
            comm_rounds: u(8)?,
            passes: f(9)?,
            accuracy: if rec[10].is_empty() { None } else { Some(f(10)?) },
        });
    }
    Ok(out)
}

/// Across-seed statistics at one recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k: usize,
    pub samples: u64,
    pub grad_evals: u64,
    pub comm_rounds: u64,
    pub passes: f64,
    pub n_seeds: usize,
    /// Indexed like [`SUMMARY_METRICS`], then by the requested statistics.
    /// `None` where a metric is missing for some seed.
    pub values: Vec<Option<Vec<f64>>>,
}

impl SummaryRow {
    pub fn get(&self, metric: &str, stat: Statistic, stats: &[Statistic]) -> Option<f64> {
        let m = SUMMARY_METRICS.iter().position(|&x| x == metric)?;
        let s = stats.iter().position(|&x| x == stat)?;
        self.values[m].as_ref().map(|v| v[s])
    }
}

pub fn statistic(xs: &[f64], stat: Statistic) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    match stat {
        Statistic::Mean => mean,
        Statistic::Std if xs.len() < 2 => 0.0,
        Statistic::Std => (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
        Statistic::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
        Statistic::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Summarizes traces that share their record schedule. Rows are emitted for
/// the iterations present in every trace.
pub fn summarize(traces: &[&[TraceRecord]], stats: &[Statistic]) -> Vec<SummaryRow> {
    let Some(first) = traces.first() else { return Vec::new() };
    let mut rows = Vec::new();
    for (idx, head) in first.iter().enumerate() {
        let at: Option<Vec<&TraceRecord>> = traces.iter().map(|t| t.get(idx).filter(|r| r.k == head.k)).collect();
        let Some(at) = at else { break };
        let values = SUMMARY_METRICS
            .iter()
            .map(|m| {
                let xs: Option<Vec<f64>> = at.iter().map(|r| metric(r, m)).collect();
                xs.map(|xs| stats.iter().map(|&s| statistic(&xs, s)).collect())
            })
            .collect();
        rows.push(SummaryRow {
            k: head.k,
            samples: head.samples,
            grad_evals: head.grad_evals,
            comm_rounds: head.comm_rounds,
            passes: head.passes,
            n_seeds: at.len(),
            values,
        });
    }
    rows
}

fn summary_header(stats: &[Statistic], leading: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    for m in SUMMARY_METRICS {
        for s in stats {
            h.push(format!("{m}_{}", s.name()));
        }
    }
    h
}

fn summary_fields(row: &SummaryRow, stats: &[Statistic]) -> Vec<String> {
    let mut out = Vec::new();
    for v in &row.values {
        match v {
            Some(v) => out.extend(v.iter().map(f64::to_string)),
            None => out.extend(stats.iter().map(|_| String::new())),
        }
    }
    out
}

/// Writes the iteration-aligned view (`run, k, ...`) in run order, and the
/// sample-aligned view (`samples, passes, run, k, ...`) sorted by samples.
pub fn write_summaries(
    by_iteration: &Path,
    by_samples: &Path,
    runs: &[(String, Vec<SummaryRow>)],
    stats: &[Statistic],
) -> Result<()> {
    let mut w = csv::Writer::from_path(by_iteration).map_err(|e| csv_err(by_iteration, e))?;
    w.write_record(summary_header(stats, &["run", "k", "samples", "grad_evals", "comm_rounds", "passes", "n_seeds"]))
        .map_err(|e| csv_err(by_iteration, e))?;
    for (name, rows) in runs {
        for r in rows {
            let mut rec = vec![
                name.clone(),
                r.k.to_string(),
                r.samples.to_string(),
                r.grad_evals.to_string(),
                r.comm_rounds.to_string(),
                r.passes.to_string(),
                r.n_seeds.to_string(),
            ];
            rec.extend(summary_fields(r, stats));
            w.write_record(rec).map_err(|e| csv_err(by_iteration, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(by_iteration, e))?;

    let mut all: Vec<(&str, &SummaryRow)> =
        runs.iter().flat_map(|(n, rows)| rows.iter().map(move |r| (n.as_str(), r))).collect();
    all.sort_by(|a, b| (a.1.samples, a.0, a.1.k).cmp(&(b.1.samples, b.0, b.1.k)));
    let mut w = csv::Writer::from_path(by_samples).map_err(|e| csv_err(by_samples, e))?;
    w.write_record(summary_header(stats, &["samples", "passes", "run", "k", "grad_evals", "comm_rounds", "n_seeds"]))
        .map_err(|e| csv_err(by_samples, e))?;
    for (name, r) in all {
        let mut rec = vec![
            r.samples.to_string(),
            r.passes.to_string(),
            name.to_string(),
            r.k.to_string(),
            r.grad_evals.to_string(),
            r.comm_rounds.to_string(),
            r.n_seeds.to_string(),
        ];
        rec.extend(summary_fields(r, stats));
        w.write_record(rec).map_err(|e| csv_err(by_samples, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(by_samples, e))
}
