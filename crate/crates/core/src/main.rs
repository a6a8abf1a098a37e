use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gradkit::cli::{self, CliError, GRADCHECK_TOLERANCE};

#[derive(Parser)]
#[command(
    name = "gradkit",
    version,
    about = "First-order optimizers and a reproducible benchmark harness"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every optimizer block of a config file and write CSV traces.
    Run {
        config: PathBuf,
        /// Output directory for traces and summaries.
        #[arg(long, default_value = "gradkit-out")]
        out: PathBuf,
        /// Leave wall-clock columns empty so output is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Compare analytic gradients with central differences at random points.
    Gradcheck {
        problem: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Show the algorithms with their default hyperparameters, and the problems.
    List,
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            out,
            no_timing,
        } => {
            let rows = cli::cmd_run(&config, &out, !no_timing)?;
            print!("{}", cli::summary_table(&rows, !no_timing));
            println!(
                "wrote {} trace(s) and summaries to {}",
                rows.len(),
                out.display()
            );
            Ok(())
        }
        Command::Gradcheck { problem, trials } => {
            let seed = cli::seed_from_env()?.unwrap_or(0);
            let report = cli::cmd_gradcheck(&problem, trials, seed)?;
            let err = report.max_relative;
            println!("{problem}: max relative error {err:e} over {trials} points");
            println!(
                "  (|g| = {:e} at the worst coordinate; max absolute error {:e})",
                report.grad_at_worst, report.max_absolute
            );
            if err < GRADCHECK_TOLERANCE {
                Ok(())
            } else {
                Err(CliError::Input(format!(
                    "gradient check failed: {err:e} is not below {GRADCHECK_TOLERANCE:e}"
                )))
            }
        }
        Command::List => {
            print!("{}", cli::list_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
