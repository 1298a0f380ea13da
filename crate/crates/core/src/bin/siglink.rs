use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(siglink::cli::run(std::env::args().skip(1)))
}
