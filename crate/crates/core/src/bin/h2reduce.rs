use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use h2reduce::cli::{self, Args, JobSpec};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let outcome = match JobSpec::from_args(&args) {
        Ok(job) => cli::run(&job),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::exit_code(e.kind()) as u8);
        }
    };
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code as u8)
}
