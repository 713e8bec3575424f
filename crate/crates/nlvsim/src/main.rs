use std::process::ExitCode;

fn main() -> ExitCode {
    nlvsim::cli::main_impl()
}
