use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use detangle::config::{load_config, resolve_workers, ExperimentId};
use detangle::runner::run;

/// Run a disentangling master-equation experiment.
#[derive(Parser, Debug)]
#[command(name = "detangle", version)]
struct Cli {
    /// One of tim-pt, landscape, ring5, pump, identities.
    experiment: ExperimentId,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output_dir, then ./<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to DETANGLE_WORKERS, then the number of cores).
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if config.experiment != cli.experiment {
        eprintln!(
            "error: config is for experiment `{}` but `{}` was requested",
            config.experiment, cli.experiment
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    let workers = match resolve_workers(cli.workers) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&config, cli.out.as_deref(), workers) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.manifest.summary).unwrap_or_default());
            if outcome.all_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: one or more identity checks failed");
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
