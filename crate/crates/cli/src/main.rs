use clap::Parser;
use dppsel_cli::{run::run, Args, CliError, RunConfig};

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.record());
            std::process::exit(err.exit_code());
        }
    };
    if let Err(e) = RunConfig::resolve(args).and_then(|cfg| run(&cfg)) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
