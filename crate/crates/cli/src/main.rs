use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{
    cmd_bounds_check, cmd_normalize, cmd_sequences, cmd_verify, exit_code_for, VerifyArgs,
};

/// Normal forms for Hamiltonians with aperiodically time-dependent perturbations.
///
/// Exit codes: 0 success, 1 input or parse error, 2 hypothesis violation,
/// 3 bound violation or tolerance exceeded.
#[derive(Parser)]
#[command(name = "strongnf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the normalization and write iterations.csv, chain.toml and summary.toml.
    Normalize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare the closed-form solution with a numerical integration.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Initial state, comma-separated; a component is `re` or `re:im`.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long = "T", default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 4096)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check the lattice-sum inequalities on a grid (the built-in grid by default).
    BoundsCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate eps_j, d_j and R_j for a problem.
    Sequences {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Normalize { config, out_dir } => cmd_normalize(config, out_dir.as_deref()),
        Command::Verify {
            config,
            x0,
            t_end,
            steps,
            tolerance,
            out_dir,
        } => cmd_verify(&VerifyArgs {
            config,
            x0,
            t_end: *t_end,
            steps: *steps,
            tolerance: *tolerance,
            out_dir: out_dir.as_deref(),
        }),
        Command::BoundsCheck { config, out_dir } => {
            cmd_bounds_check(config.as_deref(), out_dir.as_deref())
        }
        Command::Sequences { config, out_dir } => cmd_sequences(config, out_dir.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
