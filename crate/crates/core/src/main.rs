use clap::Parser;
use nash_sdp::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
