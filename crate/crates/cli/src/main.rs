//! `vacuum-probe <experiment> --config <path> [--out <dir>] [--workers N]`
//!
//! Exit status: 0 on success, 2 for a bad command line or config, 3 when a
//! computation fails (truncation overflow, positivity loss, tolerance not
//! met, dimension cap).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use vacuum_probe::harness::{run_experiment, Experiment, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "vacuum-probe", version, about = "Atom-cavity vacuum detection experiments")]
struct Cli {
    /// One of: measure, project-nonvacuum, scissors, number-resolve,
    /// joint-vacuum, sweep-fig3, wigner-fig4, adiabatic-study
    experiment: String,
    /// JSON run configuration; unknown keys are rejected
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `out_dir`, else `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: config `workers`, else all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = cli
        .experiment
        .parse::<Experiment>()
        .and_then(|exp| {
            let mut config = RunConfig::load(&cli.config)?;
            if cli.workers.is_some() {
                config.workers = cli.workers;
            }
            let out = cli.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| "out".into());
            run_experiment(exp, &config, &out)
        });
    match result {
        Ok(files) => {
            for f in files {
                info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) if e.is_config_error() => {
            error!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            error!("numerical failure: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
