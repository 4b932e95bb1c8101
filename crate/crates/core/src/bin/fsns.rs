use clap::Parser;

fn main() {
    std::process::exit(fsns::cli::execute(fsns::cli::Cli::parse()));
}
