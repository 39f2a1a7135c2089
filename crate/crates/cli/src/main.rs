mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use args::{Cli, Command};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Homophily(a) => commands::homophily(a, out)?,
        Command::Train(a) => commands::train_cmd(a, cli.seed, out)?,
        Command::Eval(a) => commands::eval(a, out)?,
        Command::FilterResponse(a) => commands::filter_response(a, out)?,
        Command::CountParams(a) => commands::count(a, out)?,
        Command::OracleCheck(a) => return commands::oracle(a, cli.seed, out),
        Command::MakeFixture(a) => commands::fixture(a, cli.seed, out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            let usage = matches!(e.downcast_ref::<h2sgnn_core::Error>(), Some(h2sgnn_core::Error::Argument(_)));
            eprintln!("error: {e:#}");
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}
