use clap::Parser;

fn main() {
    let cli = tcd::cli::Cli::parse();
    if let Err(e) = tcd::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
