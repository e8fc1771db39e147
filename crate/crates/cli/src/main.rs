use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use defer_lab_cli::{configure_threads, execute, Mode};

/// Train, evaluate, simulate and verify learning-to-defer systems.
#[derive(Debug, Parser)]
#[command(name = "defer-lab", version)]
struct Args {
    /// What to run.
    #[arg(value_enum)]
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result =
        configure_threads().and_then(|()| execute(args.mode, &args.config, args.seed, args.out));
    match result {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            println!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
