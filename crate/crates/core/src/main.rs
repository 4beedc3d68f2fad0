use std::error::Error as _;
use std::process::ExitCode;

use clap::Parser;
use regime_dns::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = run(Cli::parse());
    if let Err(e) = &result {
        let top = e.to_string();
        eprintln!("error: {top}");
        let mut source = e.source();
        while let Some(s) = source {
            let msg = s.to_string();
            if !top.contains(&msg) {
                eprintln!("  caused by: {msg}");
            }
            source = s.source();
        }
    }
    ExitCode::from(exit_code(&result))
}
