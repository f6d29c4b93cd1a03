use std::process::ExitCode;

fn main() -> ExitCode {
    forcepinch_cli::run(std::env::args_os())
}
