//! Library side of the `nbtrack` command.

pub mod args;
pub mod commands;
pub mod error;
pub mod runner;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let jobs = cli.jobs;
    match &cli.command {
        Command::Simulate(a) => {
            let files = commands::cmd_simulate(a)?;
            println!("wrote {} scene files to {}", files.len(), a.out.display());
        }
        Command::Track(a) => {
            let seqs = commands::cmd_track(a, jobs)?;
            println!("tracked {} sequences into {}", seqs.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            let e = commands::cmd_evaluate(a, jobs)?;
            commands::print_evaluation(&e, std::io::stdout().lock()).map_err(|e| CliError::io(&a.out, e))?;
        }
    }
    Ok(())
}
