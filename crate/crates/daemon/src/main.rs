use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    jammin::cli::main(jammin::cli::Cli::parse())
}
