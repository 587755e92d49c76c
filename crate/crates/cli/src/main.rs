//! `carleman`: builds partitions, weights and Hermite data, and runs the
//! numerical checks, writing CSV artifacts and a manifest per run.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "carleman", version, about, arg_required_else_help = true)]
struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    knobs: Knobs,

    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the config keys.
#[derive(Args, Debug, Default)]
struct Knobs {
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    lambda_max: Option<usize>,
    #[arg(long, global = true)]
    imax: Option<i64>,
    #[arg(long, global = true)]
    delta1: Option<f64>,
    #[arg(long, global = true)]
    delta2: Option<f64>,
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "CARLEMAN_OUT")]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate the dyadic cells of a window.
    Partition,
    /// Regularize a coefficient-size table (from --alpha-file or seeded spikes).
    Regularize {
        #[arg(long)]
        alpha_file: Option<PathBuf>,
    },
    /// Build the temporal, spatial and auxiliary weights and dump profiles.
    Weights {
        #[arg(long)]
        eps_file: Option<PathBuf>,
    },
    /// Tabulate the Hermite eigenspaces and optionally check the basis.
    Hermite {
        #[arg(long)]
        check: bool,
    },
    /// Round trip and conjugation residuals of the heat-to-Hermite map.
    Transform,
    /// Run verification suites; exits nonzero when any report fails.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        /// Comma-separated values of tau for the gap and flat suites.
        #[arg(long, value_delimiter = ',')]
        tau_list: Option<Vec<f64>>,
        #[arg(long)]
        eps_file: Option<PathBuf>,
    },
    /// Plot-ready CSV: cut-parabola outline, weight profiles, envelope margins.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Partition => "partition",
            Command::Regularize { .. } => "regularize",
            Command::Weights { .. } => "weights",
            Command::Hermite { .. } => "hermite",
            Command::Transform => "transform",
            Command::Verify { .. } => "verify",
            Command::Report => "report",
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let k = &cli.knobs;
    if let Some(v) = k.tau {
        cfg.tau = v;
    }
    if let Some(v) = k.dim {
        cfg.dim = v;
    }
    if let Some(v) = k.lambda_max {
        cfg.lambda_max = v;
    }
    if k.imax.is_some() {
        cfg.imax = k.imax;
    }
    if let Some(v) = k.delta1 {
        cfg.delta1 = v;
    }
    if let Some(v) = k.delta2 {
        cfg.delta2 = v;
    }
    if let Some(v) = k.ensemble {
        cfg.ensemble = v;
    }
    if let Some(v) = k.seed {
        cfg.seed = v;
    }
    if let Some(v) = &k.output {
        cfg.output = v.clone();
    }
    match &cli.command {
        Command::Regularize { alpha_file: Some(p) } => cfg.alpha_file = Some(p.clone()),
        Command::Weights { eps_file: Some(p) } => cfg.eps_file = Some(p.clone()),
        Command::Verify { suite, tau_list, eps_file } => {
            if let Some(s) = suite {
                cfg.suite = s.clone();
            }
            if let Some(l) = tau_list {
                cfg.tau_list = l.clone();
            }
            if let Some(p) = eps_file {
                cfg.eps_file = Some(p.clone());
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let check = matches!(cli.command, Command::Hermite { check: true });
    match commands::run(cli.command.name(), &cfg, check) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
