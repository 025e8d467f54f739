use std::process::ExitCode;

fn main() -> ExitCode {
    spml::cli::main()
}
