//! JSON checkpoints.
//!
//! ```text
//! {"format": "dstorm-checkpoint", "version": 1, "digest": "<sha256 hex>",
//!  "payload": {"config", "run", "seed", "problem_hash", "run_config", "state"}}
//! ```
//!
//! `digest` is the SHA-256 of the payload text exactly as it appears in the
//! file. `problem_hash` covers the problem data and the mixing matrix, so a
//! checkpoint cannot be resumed against different data. Floats are written
//! in shortest round-trip form, so states reload bit for bit.

use std::fs;
use std::path::Path;

use dstorm_core::metrics::TraceRecord;
use dstorm_core::optimizer::{RunConfig, SimState, Simulation};
use dstorm_core::problems::{LocalObjective, ObjectiveKind, ProblemInstance, SmoothnessBound};
use dstorm_core::proximal::Regularizer;
use dstorm_core::topology::MixingMatrix;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::error::{HarnessError, Result};

pub const FORMAT: &str = "dstorm-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Resolved experiment config, enough to rebuild the problem.
    pub config: ExperimentConfig,
    pub run: String,
    pub seed: u64,
    pub problem_hash: String,
    pub run_config: RunConfig,
    pub state: SimState,
}

#[derive(Serialize, Deserialize)]
struct Envelope<'a> {
    format: String,
    version: u32,
    digest: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

/// SHA-256 over the problem data, regularizer, smoothness choice and mixing
/// matrix.
pub fn problem_hash(problem: &ProblemInstance, mixing: &MixingMatrix) -> String {
    let mut h = Sha256::new();
    let kind: u8 = match problem.kind() {
        ObjectiveKind::Quadratic => 0,
        ObjectiveKind::Logistic => 1,
    };
    h.update([kind]);
    let bound: u8 = match problem.smoothness_bound() {
        SmoothnessBound::Gram => 0,
        SmoothnessBound::MeanSquared => 1,
    };
    h.update([bound]);
    match problem.regularizer() {
        Regularizer::Zero => h.update([0u8]),
        Regularizer::L1 { lambda } => {
            h.update([1u8]);
            h.update(lambda.to_le_bytes());
        }
    }
    h.update((problem.dim() as u64).to_le_bytes());
    h.update((problem.shards().len() as u64).to_le_bytes());
    for s in problem.shards() {
        h.update((s.len() as u64).to_le_bytes());
        for v in s.features.as_slice().iter().chain(&s.labels) {
            h.update(v.to_le_bytes());
        }
    }
    let w = mixing.matrix();
    h.update((w.rows() as u64).to_le_bytes());
    for v in w.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let payload = serde_json::to_string(self).expect("checkpoint serializes");
        let env = Envelope {
            format: FORMAT.into(),
            version: VERSION,
            digest: digest(&payload),
            payload: &RawValue::from_string(payload).expect("valid json"),
        };
        let mut out = serde_json::to_string(&env).expect("envelope serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope =
            serde_json::from_str(text).map_err(|e| HarnessError::Checkpoint(format!("corrupted checkpoint: {e}")))?;
        if env.format != FORMAT {
            return Err(HarnessError::Checkpoint(format!("not a checkpoint (format {:?})", env.format)));
        }
        if env.version != VERSION {
            return Err(HarnessError::Checkpoint(format!(
                "version mismatch: file has version {}, this build reads version {VERSION}",
                env.version
            )));
        }
        if digest(env.payload.get()) != env.digest {
            return Err(HarnessError::Checkpoint("corrupted checkpoint: digest mismatch".into()));
        }
        serde_json::from_str(env.payload.get())
            .map_err(|e| HarnessError::Checkpoint(format!("corrupted checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Rebuilds the experiment from the embedded config and checks that it
    /// reproduces the recorded problem.
    pub fn spec(&self) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec::from_config(self.config.clone(), Path::new("."))?;
        self.check_problem(&spec)?;
        Ok(spec)
    }

    pub fn check_problem(&self, spec: &ExperimentSpec) -> Result<()> {
        let h = problem_hash(&spec.problem, &spec.mixing);
        if h != self.problem_hash {
            return Err(HarnessError::Checkpoint(format!(
                "problem hash mismatch: checkpoint {}, current problem {h}",
                self.problem_hash
            )));
        }
        Ok(())
    }
}

/// A continuation: the records taken during the extra iterations and the
/// checkpoint at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct Resumed {
    pub trace: Vec<TraceRecord>,
    pub checkpoint: Checkpoint,
    pub tau: Option<usize>,
}

/// Continues `ckpt` by `extra_iters` iterations on `spec`'s problem.
pub fn resume(ckpt: &Checkpoint, spec: &ExperimentSpec, extra_iters: usize) -> Result<Resumed> {
    ckpt.check_problem(spec)?;
    let k_end = ckpt.state.k + extra_iters;
    let cfg = RunConfig { iterations: k_end.max(1), ..ckpt.run_config.clone() };
    let mut sim = Simulation::from_state(&spec.problem, &spec.mixing, cfg.clone(), ckpt.state.clone())?;
    let mut trace = Vec::new();
    sim.run_to(k_end, &mut trace)?;
    let tau = sim.output().map(|(t, _)| t);
    let mut config = ckpt.config.clone();
    config.iterations = k_end.max(1);
    let checkpoint = Checkpoint { config, run_config: cfg, state: sim.state(), ..ckpt.clone() };
    Ok(Resumed { trace, checkpoint, tau })
}
