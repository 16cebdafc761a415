//! Command-line driver: configuration, run orchestration and result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_optimize, cmd_report, cmd_simulate, cmd_synth_demand, cmd_verify, Console};
pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "dhnopt", version, about = "District heating network simulation and optimal plant control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a control trajectory and audit the energy balance.
    Simulate(RunArgs),
    /// Optimize the plant supply temperatures against the baseline control.
    Optimize(RunArgs),
    /// Synthesize per-consumer demand curves from a base load file.
    SynthDemand(RunArgs),
    /// Check the steady solve against a dense solve and an optional reference.
    Verify(RunArgs),
    /// Summarize an optimize output directory and recheck its savings.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `optimize`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

/// Loads the config and applies flag overrides.
pub fn load_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {threads:?} worker threads: {e}")))?;
    pool.install(f)
}

/// Runs one command; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Report(args) => cmd_report(&args.out_dir, Console { quiet: args.quiet }).map(drop),
        Command::Simulate(ref args)
        | Command::Optimize(ref args)
        | Command::SynthDemand(ref args)
        | Command::Verify(ref args) => load_config(args).and_then(|cfg| {
            let out = commands::out_dir(args.out_dir.as_deref(), &cfg);
            let console = Console { quiet: args.quiet };
            with_threads(cfg.threads, || match cli.command {
                Command::Simulate(_) => cmd_simulate(&cfg, &out, console).map(drop),
                Command::Optimize(_) => cmd_optimize(&cfg, &out, console).map(drop),
                Command::SynthDemand(_) => cmd_synth_demand(&cfg, &out, console).map(drop),
                Command::Verify(_) => cmd_verify(&cfg, &out, console).map(drop),
                Command::Report(_) => unreachable!(),
            })
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
