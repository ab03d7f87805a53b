//! `eigenpinn` command-line driver.

mod commands;
mod csvio;
mod plots;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "eigenpinn", version, about = "Neural eigensolver for 1-D Schrödinger-type problems")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a configured problem and write a run directory.
    Solve(SolveArgs),
    /// Write the classical reference spectrum of a configured problem.
    Oracle(OracleArgs),
    /// Tabulate eigenvalue and function errors of a run against a reference.
    Compare(CompareArgs),
    /// Print the configuration of a builtin problem, or a normalized copy of
    /// a config file.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory (defaults to the config's `out_dir`, then
    /// `runs/<problem>-seed<N>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `train.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_plots: bool,
    /// Append an error table against the finite-difference oracle to the summary.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of states.
    #[arg(short, long, default_value_t = 4)]
    pub k: usize,
    /// Interior grid points of the finite-difference solve.
    #[arg(long, default_value_t = eigenpinn::oracle::DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Run directory written by `solve`.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory written by `oracle`, or another run directory.
    #[arg(long)]
    pub oracle: PathBuf,
    /// Where to write compare.csv and compare.txt (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Builtin problem name, e.g. single_well or hydrogen_l2.
    pub builtin: Option<String>,
    #[arg(long, conflicts_with = "builtin")]
    pub config: Option<PathBuf>,
    /// Replace `builtin = ...` by the full `[problem]` table.
    #[arg(long)]
    pub full: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a, cli.quiet),
        Command::Oracle(a) => commands::oracle(&a, cli.quiet),
        Command::Compare(a) => commands::compare(&a, cli.quiet),
        Command::Export(a) => commands::export(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Failure>().map_or(commands::EXIT_ERROR, |f| f.code);
            eprintln!("eigenpinn: {e:#}");
            ExitCode::from(code)
        }
    }
}
