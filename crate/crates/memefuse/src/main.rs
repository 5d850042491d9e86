use std::process::ExitCode;

fn main() -> ExitCode {
    memefuse::cli::main_with_args(std::env::args_os())
}
