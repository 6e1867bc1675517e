use std::process::ExitCode;

fn main() -> ExitCode {
    anastomosis_cli::main_with_args(std::env::args_os()).into()
}
