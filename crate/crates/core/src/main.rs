use std::process::ExitCode;

fn main() -> ExitCode {
    rss_core::cli::main()
}
