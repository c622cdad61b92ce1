use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pairrank_cli::run(std::env::args_os()))
}
