use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dopd::compression::CompressorKind;
use dopd::harness::{run_experiment, summarize, RunConfig, FULL_HORIZON};
use dopd::parallel::Executor;
use dopd::primal_dual::{Algorithm, ReplicaMode};
use dopd::Error;

/// Distributed online primal-dual simulations with bandit feedback and
/// compressed communication.
#[derive(Parser, Debug)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment (the default).
    Run(RunArgs),
    /// Aggregate record files into a slope table.
    Summarize {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Print the resolved configuration as TOML without running it.
    ShowConfig(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    OnePoint,
    TwoPoint,
    FullInformation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CompressorArg {
    Identity,
    Uniform,
    Stochastic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReplicaArg {
    Ledger,
    StrictLocal,
}

#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full-scale defaults (n = 100) instead of the small preset.
    #[arg(long)]
    full_scale: bool,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long, value_enum)]
    compressor: Option<CompressorArg>,
    /// Quantizer pitch.
    #[arg(long)]
    delta: Option<f64>,
    /// Bits per transmitted integer.
    #[arg(long)]
    bits: Option<u32>,
    /// Horizon; rounds 1..T are executed.
    #[arg(long = "T", id = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability of the random graph.
    #[arg(long)]
    rho: Option<f64>,
    /// Lower end of the constraint offsets (Slater margin).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    #[arg(long)]
    theta3: Option<f64>,
    #[arg(long)]
    theta4: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    replica_mode: Option<ReplicaArg>,
    /// Output directory for record files and the summary.
    #[arg(long, env = "DOPD_OUT_DIR")]
    out: Option<PathBuf>,
    /// Record every `stride` rounds.
    #[arg(long)]
    stride: Option<usize>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Validation(Vec<String>),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(Error::Validation(v)) => Failure::Validation(v),
            Ok(other) => Failure::Other(other.into()),
            Err(e) => Failure::Other(e),
        }
    }
}

fn build_config(a: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None if a.full_scale => RunConfig {
            horizon: FULL_HORIZON,
            ..RunConfig::default()
        },
        None => RunConfig::desk(),
    };
    if let Some(algo) = a.algo {
        cfg.algo = match algo {
            AlgoArg::OnePoint => Algorithm::OnePoint,
            AlgoArg::TwoPoint => Algorithm::TwoPoint,
            AlgoArg::FullInformation => Algorithm::FullInformation,
        };
    }
    if let Some(c) = a.compressor {
        cfg.compressor.kind = match c {
            CompressorArg::Identity => CompressorKind::Identity,
            CompressorArg::Uniform => CompressorKind::Uniform,
            CompressorArg::Stochastic => CompressorKind::Stochastic,
        };
    }
    if let Some(m) = a.replica_mode {
        cfg.replica_mode = match m {
            ReplicaArg::Ledger => ReplicaMode::Ledger,
            ReplicaArg::StrictLocal => ReplicaMode::StrictLocal,
        };
    }
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = a.$field.clone() { $target = v.into(); })*
        };
    }
    set!(
        delta => cfg.compressor.delta,
        bits => cfg.compressor.bits,
        horizon => cfg.horizon,
        n => cfg.n,
        rho => cfg.graph.rho,
        b => cfg.problem.b,
        seeds => cfg.seeds,
        out => cfg.out,
        stride => cfg.stride,
        theta1 => cfg.schedule.theta1,
        theta2 => cfg.schedule.theta2,
        theta3 => cfg.schedule.theta3,
        theta4 => cfg.schedule.theta4,
        alpha0 => cfg.schedule.alpha0,
        gamma0 => cfg.schedule.gamma0,
        s0 => cfg.schedule.s0,
    );
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Failure::Validation(errs));
    }
    Ok(cfg)
}

fn run(a: &RunArgs) -> Result<(), Failure> {
    let cfg = build_config(a)?;
    let executor = if a.sequential {
        Executor::Sequential
    } else {
        Executor::default()
    };
    log::info!(
        "running {} with {} for T = {}, n = {}, seeds {:?}",
        cfg.algo.label(),
        cfg.compressor_label(),
        cfg.horizon,
        cfg.n,
        cfg.seeds
    );
    let report = run_experiment(&cfg, executor).map_err(anyhow::Error::from)?;
    let table = summarize(&report.csv_paths).map_err(anyhow::Error::from)?;
    print!("{}", table.render());
    println!("total bits {}", report.summary.total_bits);
    println!("summary written to {}", report.summary_path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        None => run(&cli.run),
        Some(Command::Run(a)) => run(a),
        Some(Command::ShowConfig(a)) => build_config(a).and_then(|cfg| {
            print!("{}", cfg.to_toml().map_err(anyhow::Error::from)?);
            Ok(())
        }),
        Some(Command::Summarize { csv }) => summarize(csv)
            .map(|t| print!("{}", t.render()))
            .map_err(|e| Failure::from(anyhow::Error::from(e))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(errs)) => {
            eprintln!("invalid configuration:");
            for e in errs {
                eprintln!("  - {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
