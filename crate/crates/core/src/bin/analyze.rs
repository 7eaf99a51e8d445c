use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use surveyboost::report::{load_run_config, run_pipeline, Analysis};

/// Run the survey analyses and write their artifacts under one manifest.
#[derive(Parser, Debug)]
#[command(name = "analyze", version, about)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Run a subset of analyses, e.g. `--only rq1,compare`.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<Analysis>>,

    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match load_run_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(only) = cli.only {
        config.analyses = only;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }

    match run_pipeline(&config) {
        Ok(manifest) => {
            println!(
                "wrote {} artifact(s) to {} (seed {}, config {})",
                manifest.files.len(),
                config.out.display(),
                manifest.seed,
                &manifest.config_sha256[..12],
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
