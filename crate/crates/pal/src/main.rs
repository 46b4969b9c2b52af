use clap::Parser;

fn main() {
    let cli = pal::cli::Cli::parse();
    if let Err(e) = pal::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
