use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemotaxis::cli::{
    identity_lattice, run_certify, run_refine, run_simulate, run_sweep, run_verify_identities, Outcome, RunConfig,
    SweepConfig,
};
use chemotaxis::identities::TestWeights;
use chemotaxis::{Error, Result};

#[derive(Parser)]
#[command(
    name = "chemotaxis",
    version,
    about = "Two-species chemotaxis-competition simulations and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration; the canonical one when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for test functions and probes, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with diagnostics, field dumps and estimates.
    Simulate(Common),
    /// Runs over the ε ladder with convergence gaps and uniformity bands.
    Sweep(Common),
    /// Weak-form certificates with calibrated tolerances.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Pointwise coefficient identities for the test weights.
    VerifyIdentities {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Single weight pair instead of the lattice; needs `--k` too.
        #[arg(long, requires = "k")]
        p: Option<f64>,
        #[arg(long, requires = "p")]
        k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study ending at the configured grid.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::canonical(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn levels(cfg: &mut RunConfig, levels: Option<usize>) -> Result<usize> {
    if let Some(n) = levels {
        if n < 2 {
            return Err(Error::Config {
                key: "levels".into(),
                reason: format!("need at least 2, got {n}"),
            });
        }
        cfg.levels = n;
    }
    Ok(cfg.levels)
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(c) => run_simulate(&load(&c)?),
        Command::Sweep(c) => run_sweep(&SweepConfig::new(load(&c)?)?),
        Command::Certify { common, levels: n } => {
            let mut cfg = load(&common)?;
            levels(&mut cfg, n)?;
            run_certify(&cfg)
        }
        Command::VerifyIdentities {
            samples,
            seed,
            p,
            k,
            out,
        } => {
            let weights = match (p, k) {
                (Some(p), Some(k)) => vec![TestWeights::new(p, k)?],
                _ => identity_lattice(),
            };
            run_verify_identities(&weights, samples, seed, out.as_deref())
        }
        Command::Refine { common, levels: n } => {
            let mut cfg = load(&common)?;
            let n = levels(&mut cfg, n)?;
            run_refine(&cfg, n)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(outcome) => {
            // a closed stdout (e.g. piped into `head`) must not turn a finished run into a panic
            let mut out = std::io::stdout().lock();
            for m in &outcome.messages {
                let _ = writeln!(out, "{m}");
            }
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            let verdict = if outcome.passed {
                "all checks passed"
            } else {
                "some checks failed"
            };
            let _ = writeln!(out, "{verdict}");
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
