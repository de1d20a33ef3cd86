use std::process::ExitCode;

fn main() -> ExitCode {
    infoflow::cli::main_with_args(std::env::args_os())
}
