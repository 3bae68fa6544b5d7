use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TFMM_LOG", "warn")).init();
    let cli = tfmm_cli::Cli::parse();
    ExitCode::from(tfmm_cli::run(&cli))
}
