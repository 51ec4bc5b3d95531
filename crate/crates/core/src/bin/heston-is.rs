use clap::Parser;
use heston_is::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
