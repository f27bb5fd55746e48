use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dstorm::checkpoint::{self, Checkpoint};
use dstorm::config::Weights;
use dstorm::runner::{self, ENV_OUT_DIR, ENV_THREADS};
use dstorm::{io, parse_config, spectral, trace, HarnessError, Result};

/// Decentralized stochastic optimization simulator.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method over all seeds.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long, env = ENV_OUT_DIR)]
        out: Option<PathBuf>,
        #[arg(long, env = ENV_THREADS)]
        threads: Option<usize>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        iters: usize,
        /// Directory for the new trace and checkpoint; defaults to the
        /// checkpoint's directory.
        #[arg(long, env = ENV_OUT_DIR)]
        out: Option<PathBuf>,
    },
    /// Validate a config and print it with every "auto" resolved.
    Validate { config: PathBuf },
    /// Print rho, rho_tilde(T), the recommended T and T0 for a graph.
    Spectral {
        /// ring:N, ladder:N, complete:N, path:N, random:N[:DENSITY[:SEED]] or file:PATH
        graph: String,
        #[arg(long, value_enum, default_value = "laplacian")]
        weights: WeightsArg,
        /// Chebyshev rounds; defaults to the recommended count.
        #[arg(long)]
        rounds: Option<usize>,
        /// Write the adjacency matrix here.
        #[arg(long)]
        export_graph: Option<PathBuf>,
        /// Write the mixing matrix here.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WeightsArg {
    Laplacian,
    Uniform,
}

fn cmd_run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<ExitCode> {
    let spec = parse_config(config)?;
    let out = out.unwrap_or_else(|| spec.config.output_dir.clone());
    let threads = match threads {
        Some(0) => return Err(HarnessError::Config(format!("{ENV_THREADS} must be positive"))),
        Some(t) => t,
        None => runner::threads_from_env()?,
    };
    let report = runner::run_experiment(&spec, &out, threads)?;
    for o in &report.outcomes {
        let k = o.trace.last().map_or(0, |r| r.k);
        match &o.status {
            runner::SeedStatus::Ok => eprintln!("{} seed {}: ok, k = {k}", o.run, o.seed),
            runner::SeedStatus::Diverged(m) => eprintln!("{} seed {}: {m}", o.run, o.seed),
        }
    }
    println!("wrote {}", out.display());
    let diverged = report.diverged().count();
    if diverged > 0 {
        eprintln!("{diverged} of {} seeds diverged", report.outcomes.len());
        return Ok(ExitCode::from(dstorm::exit_code::NUMERIC as u8));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_resume(path: &Path, iters: usize, out: Option<PathBuf>) -> Result<ExitCode> {
    let ckpt = Checkpoint::load(path)?;
    let spec = ckpt.spec()?;
    let k_start = ckpt.state.k;
    let resumed = checkpoint::resume(&ckpt, &spec, iters)?;
    let k_end = resumed.checkpoint.state.k;
    let dir = out.unwrap_or_else(|| path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let stem = format!("seed-{}", ckpt.seed);
    let trace_path = dir.join(format!("{stem}.k{k_start}-{k_end}.csv"));
    let ckpt_path = dir.join(format!("{stem}.k{k_end}.checkpoint.json"));
    trace::write_trace(&trace_path, &resumed.trace)?;
    resumed.checkpoint.save(&ckpt_path)?;
    println!("{} seed {}: k {k_start} -> {k_end}", ckpt.run, ckpt.seed);
    println!("wrote {} and {}", trace_path.display(), ckpt_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectral(
    graph: &str,
    weights: WeightsArg,
    rounds: Option<usize>,
    export_graph: Option<PathBuf>,
    export_matrix: Option<PathBuf>,
) -> Result<ExitCode> {
    let g = spectral::parse_graph_spec(graph)?;
    let weights = match weights {
        WeightsArg::Laplacian => Weights::Laplacian,
        WeightsArg::Uniform => Weights::Uniform,
    };
    let w = spectral::mixing_for(&g, weights)?;
    println!("{}", spectral::report(&w, rounds)?);
    if let Some(p) = export_graph {
        io::write_graph(&p, &g)?;
    }
    if let Some(p) = export_matrix {
        io::write_matrix(&p, w.matrix())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => cmd_run(&config, out, threads),
        Command::Resume { checkpoint, iters, out } => cmd_resume(&checkpoint, iters, out),
        Command::Validate { config } => parse_config(&config).map(|spec| {
            print!("{}", spec.to_toml());
            ExitCode::SUCCESS
        }),
        Command::Spectral { graph, weights, rounds, export_graph, export_matrix } => {
            cmd_spectral(&graph, weights, rounds, export_graph, export_matrix)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
