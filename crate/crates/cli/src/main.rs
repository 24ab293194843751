use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraclad_core::commands::{cmd_assemble_check, cmd_ladder, cmd_sweep, cmd_verify, parse_lambda_list, Outcome};
use fraclad_core::config::RunConfig;
use fraclad_core::Result;

/// Truncation ladders of multiple solutions for fractional semilinear problems.
#[derive(Debug, Parser)]
#[command(name = "fraclad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the one in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the solver RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the matrices and check them against the brute-force oracle.
    AssembleCheck(Common),
    /// Run the truncation ladder and judge its verdicts.
    Ladder(Common),
    /// Estimate the λ window and sweep λ over it.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated λ values; a `w` suffix scales by the estimated
        /// window (`-1w,0,0.5w`).
        #[arg(long, allow_hyphen_values = true)]
        lambda_list: Option<String>,
    },
    /// Run every invariant check.
    Verify(Common),
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.solver.rng_seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir().to_path_buf());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<Outcome> {
    Ok(match cli.command {
        Command::AssembleCheck(c) => {
            let (cfg, out) = load(&c)?;
            cmd_assemble_check(&cfg, &out, None)?.0
        }
        Command::Ladder(c) => {
            let (cfg, out) = load(&c)?;
            cmd_ladder(&cfg, &out)?.0
        }
        Command::Sweep { common, lambda_list } => {
            let list = lambda_list.as_deref().map(parse_lambda_list).transpose()?;
            let (cfg, out) = load(&common)?;
            cmd_sweep(&cfg, &out, list.as_deref())?.0
        }
        Command::Verify(c) => {
            let (cfg, out) = load(&c)?;
            cmd_verify(&cfg, &out, None)?.0
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.messages {
                println!("{line}");
            }
            if !outcome.passed {
                eprintln!("verification failed");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
