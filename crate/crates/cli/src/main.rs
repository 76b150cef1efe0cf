use clap::Parser;

use dpkmedian_cli::runner::{run, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}
