use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(binpack3d_cli::run(std::env::args_os()))
}
