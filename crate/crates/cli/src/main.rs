//! `tcmv`: mean-variance policies under proportional transaction costs.
//!
//! ```text
//! tcmv solve run.json --out results/
//! tcmv plotdata run.json
//! ```
//!
//! Exit codes: 0 success, 1 output error, 2 config error, 3 infeasible
//! target, 4 numerical failure.

mod config;
mod run;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use run::Failure;

#[derive(Parser)]
#[command(name = "tcmv", version, about = "Mean-variance portfolio selection with transaction costs")]
struct Cli {
    /// Output directory; overrides the config and TCMV_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Log progress and timings.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every target and write the full artifact set.
    Solve { config: PathBuf },
    /// Write boundaries and a frontier sweep for plotting.
    Plotdata { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (path, solve) = match &cli.command {
        Command::Solve { config } => (config, true),
        Command::Plotdata { config } => (config, false),
    };
    let outcome = RunConfig::load(path).map_err(Failure::Config).and_then(|cfg| {
        let env_default = std::env::var_os("TCMV_OUT_DIR").map(PathBuf::from);
        let dir = run::output_dir(cli.out.clone(), &cfg, env_default);
        log::info!("writing to {}", dir.display());
        if solve {
            run::run_solve(&cfg, &dir)
        } else {
            run::run_plotdata(&cfg, &dir)
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tcmv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
