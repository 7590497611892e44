use clap::Parser;

use walras_core::cli::{exit_code, run, Cli, RunConfig};

fn main() {
    let cfg = RunConfig::from(Cli::parse());
    let result = run(&cfg);
    match &result {
        Ok(out) => print!("{}", out.report),
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
