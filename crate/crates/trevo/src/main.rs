use std::process::ExitCode;

fn main() -> ExitCode {
    trevo::cli::main()
}
