//! TOML experiment configuration.
//!
//! A config names one problem, one topology and a list of runs that share
//! them. Most tuning fields accept the string `"auto"`, which resolves from
//! the topology and problem constants when the config is parsed. Parsing
//! validates everything eagerly: schedule bounds are checked against the
//! measured `rho_tilde` and `L`, and violations quote the bound.
//!
//! ```toml
//! seeds = 5
//! iterations = 5000
//! record_every = 10
//! output_dir = "out"
//!
//! [topology]
//! kind = "ring"        # ring | ladder | random | complete | path | file
//! agents = 8
//! weights = "uniform"  # laplacian | uniform (rings only)
//! rounds = "auto"
//!
//! [problem]
//! kind = "logistic"    # quadratic | logistic
//! lambda = 1e-4
//!
//! [[runs]]
//! method = "v2"        # v1-sg | v1-svrg | v2 | dsgt
//! batch = 16
//! schedule = "diminishing"
//! alpha = "auto"
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use dstorm_core::optimizer::{
    max_alpha_constant, max_alpha_diminishing, min_k0, EstimatorConfig, Method, RunConfig, Schedule, Selection,
    Variant, DEFAULT_INIT_SCALE,
};
use dstorm_core::problems::{BatchSize, LogisticParams, ProblemInstance, QuadraticParams, SmoothnessBound};
use dstorm_core::proximal::Regularizer;
use dstorm_core::topology::{
    build_graph, chebyshev_rounds_for_target, initial_rounds, laplacian_mixing, uniform_ring_mixing, ChebyshevOperator,
    GraphKind, MixingMatrix,
};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{HarnessError, Result};
use crate::io;

/// A value or the literal string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Auto<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: Copy> Auto<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Self::Auto => None,
            Self::Value(v) => Some(*v),
        }
    }

    pub fn or_else(&self, f: impl FnOnce() -> T) -> T {
        self.value().unwrap_or_else(f)
    }
}

impl<T: Serialize> Serialize for Auto<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Auto<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged, expecting = "\"auto\" or a value")]
        enum Repr<T> {
            Tag(AutoTag),
            Value(T),
        }
        #[derive(Deserialize)]
        enum AutoTag {
            #[serde(rename = "auto")]
            Auto,
        }
        Ok(match Repr::<T>::deserialize(d)? {
            Repr::Tag(AutoTag::Auto) => Self::Auto,
            Repr::Value(v) => Self::Value(v),
        })
    }
}

/// A sample count or `"full"` for the whole shard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Batch(pub BatchSize);

impl Serialize for Batch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Sample(m) => s.serialize_u64(m as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Batch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Clone, Copy)]
        struct V(PhantomData<Batch>);
        impl Visitor<'_> for V {
            type Value = Batch;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive batch size or \"full\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Batch, E> {
                match usize::try_from(v) {
                    Ok(m) if m > 0 => Ok(Batch(BatchSize::Sample(m))),
                    _ => Err(E::invalid_value(de::Unexpected::Signed(v), &self)),
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Batch, E> {
                self.visit_i64(i64::try_from(v).map_err(|_| E::invalid_value(de::Unexpected::Unsigned(v), &self))?)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Batch, E> {
                match v {
                    "full" => Ok(Batch(BatchSize::Full)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V(PhantomData))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Std,
    Min,
    Max,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Std => "std",
            Self::Min => "min",
            Self::Max => "max",
        }
    }
}

fn default_statistics() -> Vec<Statistic> {
    vec![Statistic::Mean, Statistic::Std]
}

fn default_seeds() -> usize {
    1
}

fn default_record_every() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of seeds per run; seed `s` uses root seed `root_seed + s`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub root_seed: u64,
    pub iterations: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    pub topology: TopologyConfig,
    pub problem: ProblemConfig,
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Ring,
    Ladder,
    Random,
    Complete,
    Path,
    /// Adjacency matrix read from `path`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Laplacian,
    /// `1/3` on each ring edge and the diagonal.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
    /// Edge probability for `random`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub weights: Weights,
    /// Chebyshev rounds `T` per communication.
    #[serde(default)]
    pub rounds: Auto<usize>,
    /// Chebyshev rounds `T0` for the initial tracking variable.
    #[serde(default)]
    pub initial_rounds: Auto<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    Quadratic(QuadraticConfig),
    Logistic(LogisticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticConfig {
    pub dim: usize,
    pub samples_per_agent: usize,
    pub heterogeneity: f64,
    pub noise: f64,
    pub seed: u64,
    /// l1 strength; 0 means no regularizer.
    pub lambda: f64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        let p = QuadraticParams::default();
        Self {
            dim: p.dim,
            samples_per_agent: p.samples_per_agent,
            heterogeneity: p.heterogeneity,
            noise: p.noise,
            seed: p.seed,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothnessChoice {
    #[default]
    Gram,
    MeanSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticConfig {
    /// Delimited text file to load instead of synthetic data. The synthetic
    /// generator fields are ignored when it is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub delimiter: char,
    pub samples: usize,
    pub dim: usize,
    pub sparsity: f64,
    pub feature_scale: f64,
    pub margin_scale: f64,
    pub seed: u64,
    /// Seed of the shuffle that deals samples to agents.
    pub split_seed: Auto<u64>,
    pub lambda: f64,
    pub smoothness: SmoothnessChoice,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        let p = LogisticParams::default();
        Self {
            dataset: None,
            delimiter: ',',
            samples: p.n_samples,
            dim: p.dim,
            sparsity: p.sparsity,
            feature_scale: p.feature_scale,
            margin_scale: p.margin_scale,
            seed: p.seed,
            split_seed: Auto::Auto,
            lambda: 1e-4,
            smoothness: SmoothnessChoice::Gram,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    #[serde(rename = "v1-sg")]
    V1Sg,
    #[serde(rename = "v1-svrg")]
    V1Svrg,
    #[serde(rename = "v2")]
    V2,
    #[serde(rename = "dsgt")]
    Dsgt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Constant,
    Diminishing,
    Practical,
    Fixed,
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionName {
    Uniform,
    AlphaWeighted,
}

fn default_batch() -> Batch {
    Batch(BatchSize::Sample(16))
}

fn default_snapshot_batch() -> Batch {
    Batch(BatchSize::Full)
}

fn default_init_scale() -> f64 {
    DEFAULT_INIT_SCALE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Defaults to the method name; must be unique.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub method: MethodName,
    #[serde(default = "default_batch")]
    pub batch: Batch,
    /// Auto is `ceil((N K)^{1/3})`.
    #[serde(default)]
    pub initial_batch: Auto<Batch>,
    /// v1-SVRG only. Auto is one pass over the average shard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_period: Option<Auto<usize>>,
    /// v1-SVRG only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_batch: Option<Batch>,
    /// Defaults to `diminishing`, or `inverse-sqrt` for DSGT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleName>,
    #[serde(default)]
    pub alpha: Auto<f64>,
    /// Diminishing and practical schedules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<Auto<usize>>,
    /// Fixed schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Practical schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_coef: Option<f64>,
    #[serde(default)]
    pub selection: Auto<SelectionName>,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl RunSpec {
    pub fn new(method: MethodName) -> Self {
        Self {
            name: None,
            method,
            batch: default_batch(),
            initial_batch: Auto::Auto,
            snapshot_period: None,
            snapshot_batch: None,
            schedule: None,
            alpha: Auto::Auto,
            k0: None,
            beta: None,
            beta_coef: None,
            selection: Auto::Auto,
            init_scale: DEFAULT_INIT_SCALE,
        }
    }

    pub fn method_str(&self) -> &'static str {
        match self.method {
            MethodName::V1Sg => "v1-sg",
            MethodName::V1Svrg => "v1-svrg",
            MethodName::V2 => "v2",
            MethodName::Dsgt => "dsgt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedRun {
    pub name: String,
    pub config: RunConfig,
}

/// A validated experiment: the config with every `"auto"` resolved and
/// relative paths made absolute, plus the built problem, mixing matrix and
/// per-run optimizer configs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: ExperimentConfig,
    pub problem: ProblemInstance,
    pub mixing: MixingMatrix,
    pub rho_tilde: f64,
    pub runs: Vec<NamedRun>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Parses and validates a config file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentSpec> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    ExperimentSpec::from_config(config, base_dir)
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::path::absolute(&joined).unwrap_or(joined)
}

/// Smallest `m` with `m^3 >= n`.
fn ceil_cbrt(n: usize) -> usize {
    let mut m = (n as f64).cbrt().floor() as usize;
    while m.pow(3) < n {
        m += 1;
    }
    m.max(1)
}

fn build_topology(t: &mut TopologyConfig, base: &Path) -> Result<MixingMatrix> {
    let graph = match t.kind {
        TopologyKind::File => {
            let path = t.path.as_ref().ok_or_else(|| config_err("topology kind \"file\" needs `path`"))?;
            let path = absolute(base, path);
            let g = io::read_graph(&path)?;
            if let Some(n) = t.agents {
                if n != g.n_agents() {
                    return Err(config_err(format!(
                        "topology.agents = {n} but the graph file has {} nodes",
                        g.n_agents()
                    )));
                }
            }
            t.path = Some(path);
            t.agents = Some(g.n_agents());
            g
        }
        kind => {
            if t.path.is_some() {
                return Err(config_err("topology.path only applies to kind \"file\""));
            }
            let n = t.agents.ok_or_else(|| config_err("topology.agents is required"))?;
            let kind = match kind {
                TopologyKind::Ring => GraphKind::Ring,
                TopologyKind::Ladder => GraphKind::Ladder,
                TopologyKind::Complete => GraphKind::Complete,
                TopologyKind::Path => GraphKind::Path,
                TopologyKind::Random => {
                    let density = *t.density.get_or_insert(0.5);
                    GraphKind::RandomConnected { density }
                }
                TopologyKind::File => unreachable!(),
            };
            if t.density.is_some() && !matches!(kind, GraphKind::RandomConnected { .. }) {
                return Err(config_err("topology.density only applies to kind \"random\""));
            }
            build_graph(kind, n, t.seed)?
        }
    };
    Ok(match t.weights {
        Weights::Laplacian => laplacian_mixing(&graph)?,
        Weights::Uniform => uniform_ring_mixing(&graph)?,
    })
}

fn build_problem(p: &mut ProblemConfig, n: usize, base: &Path) -> Result<ProblemInstance> {
    let reg = |lambda: f64| -> Result<Regularizer> {
        if lambda == 0.0 {
            Ok(Regularizer::Zero)
        } else {
            Ok(Regularizer::l1(lambda)?)
        }
    };
    match p {
        ProblemConfig::Quadratic(q) => {
            let params = QuadraticParams {
                n_agents: n,
                dim: q.dim,
                samples_per_agent: q.samples_per_agent,
                heterogeneity: q.heterogeneity,
                noise: q.noise,
                seed: q.seed,
            };
            Ok(ProblemInstance::quadratic(&params, reg(q.lambda)?)?)
        }
        ProblemConfig::Logistic(l) => {
            let bound = match l.smoothness {
                SmoothnessChoice::Gram => SmoothnessBound::Gram,
                SmoothnessChoice::MeanSquared => SmoothnessBound::MeanSquared,
            };
            let split_seed = *l.split_seed.value().get_or_insert(l.seed + 1);
            l.split_seed = Auto::Value(split_seed);
            let inst = match &l.dataset {
                Some(path) => {
                    let path = absolute(base, path);
                    let delim = u8::try_from(l.delimiter)
                        .map_err(|_| config_err("problem.delimiter must be a single ASCII character"))?;
                    let data = io::read_dataset(&path, delim)?;
                    l.dataset = Some(path);
                    ProblemInstance::logistic_from_dataset(&data, n, split_seed, reg(l.lambda)?)?
                }
                None => {
                    let params = LogisticParams {
                        n_agents: n,
                        n_samples: l.samples,
                        dim: l.dim,
                        sparsity: l.sparsity,
                        feature_scale: l.feature_scale,
                        margin_scale: l.margin_scale,
                        seed: l.seed,
                    };
                    let planted = ProblemInstance::planted_logistic(&params)?;
                    ProblemInstance::logistic_from_dataset(&planted.dataset, n, split_seed, reg(l.lambda)?)?
                }
            };
            Ok(inst.with_smoothness_bound(bound))
        }
    }
}

struct Context {
    n_agents: usize,
    iterations: usize,
    smoothness: f64,
    rho_tilde: f64,
    shard_mean: usize,
}

fn resolve_run(r: &mut RunSpec, cx: &Context) -> Result<Schedule> {
    let default_name = r.method_str();
    let name = r.name.get_or_insert_with(|| default_name.to_string()).clone();
    let fail = |m: String| config_err(format!("run `{name}`: {m}"));
    let is_dsgt = r.method == MethodName::Dsgt;
    let sched_name =
        *r.schedule.get_or_insert(if is_dsgt { ScheduleName::InverseSqrt } else { ScheduleName::Diminishing });

    if is_dsgt && sched_name != ScheduleName::InverseSqrt {
        return Err(fail("DSGT only supports schedule = \"inverse-sqrt\"".into()));
    }
    if !is_dsgt && sched_name == ScheduleName::InverseSqrt {
        return Err(fail("schedule \"inverse-sqrt\" is for DSGT only".into()));
    }
    if r.method != MethodName::V1Svrg && (r.snapshot_period.is_some() || r.snapshot_batch.is_some()) {
        return Err(fail("snapshot_period and snapshot_batch only apply to v1-svrg".into()));
    }
    let uses_k0 = matches!(sched_name, ScheduleName::Diminishing | ScheduleName::Practical);
    if !uses_k0 && r.k0.is_some() {
        return Err(fail("k0 only applies to the diminishing and practical schedules".into()));
    }
    if sched_name != ScheduleName::Fixed && r.beta.is_some() {
        return Err(fail("beta only applies to the fixed schedule".into()));
    }
    if sched_name != ScheduleName::Practical && r.beta_coef.is_some() {
        return Err(fail("beta_coef only applies to the practical schedule".into()));
    }

    let k0_min = min_k0(cx.rho_tilde);
    let (l, n, rt) = (cx.smoothness, cx.n_agents, cx.rho_tilde);
    let sched = match sched_name {
        ScheduleName::Constant => {
            let alpha = r.alpha.or_else(|| max_alpha_constant(cx.iterations, l, rt));
            r.alpha = Auto::Value(alpha);
            Schedule::constant(alpha, cx.iterations, l, n, rt)
        }
        ScheduleName::Diminishing | ScheduleName::Practical => {
            let k0 = r.k0.unwrap_or_default().or_else(|| k0_min);
            r.k0 = Some(Auto::Value(k0));
            let alpha = r.alpha.or_else(|| max_alpha_diminishing(k0, l, rt));
            r.alpha = Auto::Value(alpha);
            if sched_name == ScheduleName::Diminishing {
                Schedule::diminishing(alpha, k0, l, n, rt)
            } else {
                Schedule::practical(alpha, k0, *r.beta_coef.get_or_insert(0.0))
            }
        }
        ScheduleName::Fixed => {
            let alpha = r.alpha.value().ok_or_else(|| fail("the fixed schedule needs an explicit alpha".into()))?;
            let beta = r.beta.ok_or_else(|| fail("the fixed schedule needs beta".into()))?;
            Schedule::fixed(alpha, beta)
        }
        ScheduleName::InverseSqrt => {
            // First step of the default diminishing schedule.
            let alpha = r.alpha.or_else(|| max_alpha_diminishing(k0_min, l, rt) / (k0_min as f64).cbrt());
            r.alpha = Auto::Value(alpha);
            Schedule::inverse_sqrt(alpha)
        }
    };
    let sched = sched.map_err(|e| fail(e.to_string()))?;

    if r.method == MethodName::V1Svrg {
        let m = r.batch.0.count(cx.shard_mean).max(1);
        let q = r.snapshot_period.unwrap_or_default().or_else(|| cx.shard_mean.div_ceil(m).max(1));
        r.snapshot_period = Some(Auto::Value(q));
        r.snapshot_batch.get_or_insert(default_snapshot_batch());
    }
    r.initial_batch =
        Auto::Value(r.initial_batch.or_else(|| Batch(BatchSize::Sample(ceil_cbrt(cx.n_agents * cx.iterations)))));
    r.selection = Auto::Value(r.selection.or_else(|| match sched.default_selection() {
        Selection::Uniform => SelectionName::Uniform,
        Selection::AlphaWeighted => SelectionName::AlphaWeighted,
    }));
    Ok(sched)
}

impl ExperimentSpec {
    /// Validates `config`, resolving `"auto"` values and relative paths
    /// against `base_dir`.
    pub fn from_config(mut config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        if config.seeds == 0 {
            return Err(config_err("seeds must be at least 1"));
        }
        if config.iterations == 0 {
            return Err(config_err("iterations must be at least 1"));
        }
        if config.record_every == 0 {
            return Err(config_err("record_every must be at least 1"));
        }
        if config.statistics.is_empty() {
            return Err(config_err("statistics must name at least one of mean, std, min, max"));
        }
        if config.runs.is_empty() {
            return Err(config_err("at least one [[runs]] entry is required"));
        }
        if config.root_seed.checked_add(config.seeds as u64).is_none() {
            return Err(config_err("root_seed + seeds overflows"));
        }

        let mixing = build_topology(&mut config.topology, base_dir)?;
        let n = mixing.n_agents();
        let problem = build_problem(&mut config.problem, n, base_dir)?;

        let rho = mixing.rho();
        let t = &mut config.topology;
        let rounds = t.rounds.or_else(|| chebyshev_rounds_for_target(rho).unwrap_or(1));
        let op = ChebyshevOperator::new(mixing.clone(), rounds)?;
        let rho_tilde = op.rho_tilde();
        let t0 = t.initial_rounds.value().map_or_else(|| initial_rounds(rho, rho_tilde), Ok)?;
        t.rounds = Auto::Value(rounds);
        t.initial_rounds = Auto::Value(t0);

        use dstorm_core::problems::LocalObjective;
        let cx = Context {
            n_agents: n,
            iterations: config.iterations,
            smoothness: problem.smoothness(),
            rho_tilde,
            shard_mean: problem.total_samples().div_ceil(n),
        };

        let mut names = BTreeSet::new();
        let mut runs = Vec::with_capacity(config.runs.len());
        for r in &mut config.runs {
            let schedule = resolve_run(r, &cx)?;
            let name = r.name.clone().unwrap_or_default();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(config_err(format!("run name {name:?} is not usable as a directory name")));
            }
            if !names.insert(name.clone()) {
                return Err(config_err(format!("duplicate run name `{name}`; set `name` to tell runs apart")));
            }
            let batch = r.batch.0;
            let initial_batch = r.initial_batch.value().expect("resolved").0;
            let estimator = |variant| Method::Deepstorm(EstimatorConfig { variant, batch, initial_batch });
            let method = match r.method {
                MethodName::V1Sg => estimator(Variant::V1Sg),
                MethodName::V2 => estimator(Variant::V2),
                MethodName::V1Svrg => estimator(Variant::V1Svrg {
                    period: r.snapshot_period.and_then(|a| a.value()).expect("resolved"),
                    snapshot_batch: r.snapshot_batch.expect("resolved").0,
                }),
                MethodName::Dsgt => Method::Dsgt { batch, initial_batch },
            };
            let selection = match r.selection.value().expect("resolved") {
                SelectionName::Uniform => Selection::Uniform,
                SelectionName::AlphaWeighted => Selection::AlphaWeighted,
            };
            let cfg = RunConfig {
                method,
                schedule,
                rounds,
                initial_rounds: t0,
                iterations: config.iterations,
                seed: config.root_seed,
                selection,
                record_every: config.record_every,
                init_scale: r.init_scale,
            };
            cfg.validate().map_err(|e| config_err(format!("run `{name}`: {e}")))?;
            runs.push(NamedRun { name, config: cfg });
        }
        Ok(Self { config, problem, mixing, rho_tilde, runs })
    }

    /// The resolved config as TOML. Parsing it again yields an equal spec.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("config serializes")
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.config.seeds as u64).map(|s| self.config.root_seed + s)
    }

    pub fn run(&self, name: &str) -> Option<&NamedRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}
