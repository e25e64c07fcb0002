use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use resilib_core::harness::{self, UseCase};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "resilib", version, about = "Run resilience use-case experiments and check their outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Networked control under a noise change
    Wncs(RunArgs),
    /// Replicating random walks under link and node failures
    Walks(RunArgs),
    /// Drone swarm coverage with correlated failures
    Swarm(RunArgs),
    /// Motif-based network reconfiguration against attacks
    Motif(RunArgs),
    /// Rate adaptation over a degrading link
    Ratelink(RunArgs),
    /// Multi-agent bandits with epistemic attack recovery
    Mamab(RunArgs),
    /// Active-inference mapping in a grid world
    Gridworld(RunArgs),
    /// Recompute aggregates in an output folder from its per-seed files
    Verify {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Seeds run in parallel at most this many at a time
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output folder; falls back to the config's `out`, then `results`
    #[arg(long, env = "RESILIB_OUT")]
    out: Option<PathBuf>,
}

fn run(tag: UseCase, args: RunArgs) -> Result<()> {
    let config = harness::load_config(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if config.tag() != tag {
        bail!("config is for `{}`, not `{tag}`", config.tag());
    }
    let out = args.out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let report = harness::run(&config, args.jobs, &out)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn verify(dir: PathBuf) -> Result<bool> {
    let report = harness::verify(&dir)?;
    for tag in &report.checked {
        println!("checked {tag}");
    }
    for p in &report.problems {
        eprintln!("problem: {p}");
    }
    Ok(report.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify { dir } => verify(dir),
        Command::Wncs(a) => run(UseCase::Wncs, a).map(|_| true),
        Command::Walks(a) => run(UseCase::Walks, a).map(|_| true),
        Command::Swarm(a) => run(UseCase::Swarm, a).map(|_| true),
        Command::Motif(a) => run(UseCase::Motif, a).map(|_| true),
        Command::Ratelink(a) => run(UseCase::Ratelink, a).map(|_| true),
        Command::Mamab(a) => run(UseCase::Mamab, a).map(|_| true),
        Command::Gridworld(a) => run(UseCase::Gridworld, a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
