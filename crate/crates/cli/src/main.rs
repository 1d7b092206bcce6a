use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match pinet_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; --help and --version are not
            return ExitCode::from(if e.use_stderr() { pinet_cli::error::EXIT_VALIDATION } else { 0 });
        }
    };
    ExitCode::from(pinet_cli::main_with(cli))
}
