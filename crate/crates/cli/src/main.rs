//! `omf` — train dictionaries online, solve lasso problems, project onto
//! constraint sets, and merge benchmark traces.

mod commands;
mod settings;

use clap::{Parser, Subcommand};

use omf_core::Error;

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) => 1,
        Error::Io { .. }
        | Error::Format { .. }
        | Error::EmptySource
        | Error::DimensionMismatch { .. }
        | Error::NonFinite(_) => 2,
        Error::DegeneratePath { .. } | Error::NonConvergence { .. } => 3,
    }
}

#[derive(Parser)]
#[command(name = "omf", version, about = "Online matrix factorization and sparse coding toolkit")]
struct Cli {
    /// Cap the worker-thread pool used for mini-batch coding.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dictionary and emit a snapshot plus a metrics trace.
    Train(commands::TrainArgs),
    /// Sparse-code one signal against a dictionary.
    Lasso(commands::LassoArgs),
    /// Project a vector onto a constraint set.
    Project(commands::ProjectArgs),
    /// Train with a factorization preset and emit the coded data as well.
    Factorize(commands::FactorizeArgs),
    /// Merge metrics traces into one long-format plot file.
    Compare(commands::CompareArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes, everything else is usage.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Lasso(args) => commands::lasso(args),
        Command::Project(args) => commands::project(args),
        Command::Factorize(args) => commands::factorize(args),
        Command::Compare(args) => commands::compare(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
