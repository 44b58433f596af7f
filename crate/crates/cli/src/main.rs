//! `cbm` — configuration-driven driver for the CBM library.
//!
//! Numeric parameters live in a JSON config file; command-line flags only
//! select the config path, an optional seed override, and verbosity. Exit
//! codes: 0 success, 2 precondition violation (bad config, degenerate
//! pair, inapplicable formula), 3 numerical failure or failed validation
//! gate.

mod artifact;
mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use artifact::{config_hash, load_config, ArtifactSink};
use cbm_core::CbmError;
use tasks::GateFailure;

#[derive(Parser)]
#[command(name = "cbm", about = "CSBPs with spectrally positive migration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print progress details to stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Φ and Z over the configured x grid.
    Scale(Common),
    /// Simulate a single path and dump its trajectory.
    Simulate(Common),
    /// Estimate the first-passage Laplace transform by Monte Carlo.
    McPassage(Common),
    /// Estimate the explosion transform by threshold sweep.
    McExplosion(Common),
    /// Estimate the occupation transform.
    McOccupation(Common),
    /// Run a validation suite; nonzero exit when its gate fails.
    Validate {
        which: ValidateWhich,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidateWhich {
    /// Generator ODE identities for the configured pair.
    Generator,
    /// Closed-form linear-mechanism table.
    Example,
    /// Monte Carlo vs quadrature z-scores.
    Cross,
    /// Superposition and monotone-coupling identities.
    Coupling,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CbmError>() {
            return match c {
                CbmError::QuadratureAccuracy { .. } | CbmError::BracketFailure(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<GateFailure>().is_some() {
            return 3;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, task): (&Common, &str) = match &cli.command {
        Command::Scale(c) => (c, "scale"),
        Command::Simulate(c) => (c, "simulate"),
        Command::McPassage(c) => (c, "mc-passage"),
        Command::McExplosion(c) => (c, "mc-explosion"),
        Command::McOccupation(c) => (c, "mc-occupation"),
        Command::Validate { common, .. } => (common, "validate"),
    };
    let (bytes, cfg) = load_config(&common.config)?;
    // fail on violated preconditions before any artifact is written
    let pair = cfg.pair()?;
    drop(pair);
    let threads = cfg
        .threads
        .or_else(|| std::env::var("CBM_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok(); // a pool may already exist in tests; the first wins
    let seed = common.seed.unwrap_or(cfg.mc.seed);
    let hash = config_hash(&bytes, common.seed);
    if common.verbose {
        eprintln!("task {task}: config hash {hash}, seed {seed}, threads {threads}");
    }
    let mut sink = ArtifactSink::new(&cfg.output.dir, &cfg.output.prefix, hash)?;
    match &cli.command {
        Command::Scale(_) => tasks::run_scale(&cfg, &mut sink)?,
        Command::Simulate(_) => tasks::run_simulate(&cfg, &mut sink, seed)?,
        Command::McPassage(_) => tasks::run_mc_passage(&cfg, &mut sink, seed)?,
        Command::McExplosion(_) => tasks::run_mc_explosion(&cfg, &mut sink, seed)?,
        Command::McOccupation(_) => tasks::run_mc_occupation(&cfg, &mut sink, seed)?,
        Command::Validate { which, .. } => match which {
            ValidateWhich::Generator => tasks::run_validate_generator(&cfg, &mut sink)?,
            ValidateWhich::Example => tasks::run_validate_example(&cfg, &mut sink)?,
            ValidateWhich::Cross => tasks::run_validate_cross(&cfg, &mut sink, seed)?,
            ValidateWhich::Coupling => {
                tasks::run_validate_coupling(&cfg, &mut sink, seed)?
            }
        },
    }
    for p in &sink.written {
        println!("{}", p.display());
    }
    Ok(())
}
