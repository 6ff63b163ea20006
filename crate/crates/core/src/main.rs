use std::process::ExitCode;

fn main() -> ExitCode {
    mixtraffic::cli::main()
}
