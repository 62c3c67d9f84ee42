use clap::Parser;
use sicf_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("sicf {}: {err}", cli.command.name());
            std::process::exit(err.exit_code());
        }
    }
}
