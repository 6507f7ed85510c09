use clap::Parser;

use maastar::cli::{run, Cli, EXIT_ERROR};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            e.print().ok();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}
