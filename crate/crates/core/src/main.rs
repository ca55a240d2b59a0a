use std::process::ExitCode;

fn main() -> ExitCode {
    regrade::cli::run(std::env::args_os())
}
