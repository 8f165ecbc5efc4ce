//! `hisd`: sphere-constrained high-index saddle dynamics from the command
//! line. Subcommands: `run` (one trajectory), `converge` (τ sweep against a
//! fine reference), `check` (constraint invariants and defect scaling).

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hisd_cli::commands;
use hisd_cli::config::CommonArgs;
use hisd_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "hisd",
    version,
    about = "Semi-implicit sphere-constrained high-index saddle dynamics",
    after_help = "Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.\n\
                  HISD_THREADS caps sweep parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as JSON lines.
    Run(CommonArgs),
    /// Run a step-size sweep against a fine reference and tabulate errors
    /// and convergence rates.
    Converge(CommonArgs),
    /// Verify constraint invariants and second-order defect scaling.
    Check(CommonArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => commands::cmd_run(&args),
        Command::Converge(args) => commands::cmd_converge(&args),
        Command::Check(args) => commands::cmd_check(&args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            std::process::exit(0);
        }
        Err(err) => {
            eprint!("{err}");
            std::process::exit(1);
        }
    };
    if let Err(err) = dispatch(cli) {
        err.report();
        std::process::exit(err.exit_code());
    }
}
