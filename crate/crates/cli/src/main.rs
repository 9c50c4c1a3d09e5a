use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use dsgm_cli::{cmd_audit, cmd_montecarlo_rho, cmd_run, list_problems, RunConfig, Status};

#[derive(Parser)]
#[command(name = "dsgm", version, about = "Multi-agent subgradient experiments over state-dependent random links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.outputs.clone_from(out);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trace and write trace, metrics and manifest files
    Run(Common),
    /// Estimate expected disagreement over many trials and fit decay laws
    MontecarloRho {
        #[command(flatten)]
        common: Common,
        /// Override the configured trial count
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Check every per-step invariant and report per-check verdicts
    Audit {
        #[command(flatten)]
        common: Common,
        /// Audit a trace CSV written by `run` instead of simulating
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the built-in problem catalog
    ListProblems,
}

fn execute(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Run(common) => {
            let outcome = cmd_run(&common.load()?)?;
            print!("{}", outcome.audit);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(outcome.status)
        }
        Command::MontecarloRho { common, trials } => {
            let mut cfg = common.load()?;
            if let (Some(t), Some(mc)) = (trials, cfg.montecarlo.as_mut()) {
                mc.trials = t;
            }
            let outcome = cmd_montecarlo_rho(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&outcome.report)?);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(Status::Clean)
        }
        Command::Audit { common, trace } => {
            let (status, audit) = cmd_audit(&common.load()?, trace.as_deref())?;
            print!("{audit}");
            println!("{}", if status == Status::Clean { "all checks passed" } else { "violations found" });
            Ok(status)
        }
        Command::ListProblems => {
            print!("{}", list_problems());
            Ok(Status::Clean)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
