mod args;
mod commands;
mod media;

use std::process::ExitCode;

use clap::Parser;
use vrcnn_core::ErrorKind;

use args::{Cli, Command};

/// A problem with the command line itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::num::ParseIntError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<vrcnn_core::Error>() {
            return match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            };
        }
    }
    EXIT_DATA
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let out = match &cli.command {
        Command::Train(a) => commands::train(a)?,
        Command::Apply(a) => commands::apply(a)?,
        Command::Degrade(a) => commands::degrade_cmd(a)?,
        Command::Eval(a) => commands::eval(a)?,
        Command::Bdrate(a) => commands::bdrate(a)?,
        Command::Params(a) => commands::params(a)?,
        Command::Bench(a) => commands::bench(a)?,
        Command::Synth(a) => commands::synth(a)?,
    };
    println!("{}", out.text);
    if let Some(path) = &cli.report {
        commands::write_json(path, &out.json)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
