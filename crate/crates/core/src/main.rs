use clap::Parser;

use epg_core::cli::{run, Cli, EXIT_OK};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if cli.json_errors {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}
