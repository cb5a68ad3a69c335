use clap::Parser;

use fourphoton::cli::{run, Cli, EXIT_INPUT};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}
