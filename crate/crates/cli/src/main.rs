use clap::Parser;
use wvkerr_cli::{execute, exit, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    if let Err(e) = execute(&cli) {
        eprintln!("error[{}]: {e}", e.class());
        std::process::exit(e.exit_code());
    }
}
