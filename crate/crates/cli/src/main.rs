use std::panic;
use std::process::ExitCode;

use clap::Parser;
use lppl_cli::{execute, read_manifest, Args, CliError, RunConfig};

fn run(args: &Args) -> Result<(), CliError> {
    let config = match &args.replay {
        Some(path) => {
            let mut config = read_manifest(path)?.config;
            config.out = args.out.clone();
            config.validate()?;
            config
        }
        None => RunConfig::from_args(args)?,
    };
    let out = execute(&config)?;
    eprintln!("wrote {} files to {}", out.files().len(), out.dir().display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match panic::catch_unwind(|| run(&args)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
