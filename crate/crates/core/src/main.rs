use clap::Parser;
use paraboloid_lab::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            if outcome.file.is_none() {
                print!("{}", outcome.rendered);
            }
            std::process::exit(outcome.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
