use std::process::ExitCode;

use clap::Parser;
use phenomapper::cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = e.body();
            match body.detail_path {
                Some(path) => eprintln!("error [{}] at {path}: {}", body.error_code, body.message),
                None => eprintln!("error [{}]: {}", body.error_code, body.message),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
