use clap::Parser;
use fairlabels_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = fairlabels_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(fairlabels_cli::exit_code(e.class()));
    }
}
