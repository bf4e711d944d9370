mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, RunConfig};

/// Exit code for rejected input.
const EXIT_VALIDATION: u8 = 2;
/// Exit code for a numerical failure during the run.
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> (u8, String) {
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<respoles::Error>())
    {
        Some(e) if e.is_validation() => (EXIT_VALIDATION, e.kind().to_string()),
        Some(e) => (EXIT_NUMERICAL, e.kind().to_string()),
        None => (EXIT_VALIDATION, "Usage".to_string()),
    }
}

/// A closed downstream pipe (e.g. `| head`) is not an error.
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESPOLES_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::from_cli(cli).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit_code(&err);
            eprintln!("error[{kind}]: {err:#}");
            ExitCode::from(code)
        }
    }
}
