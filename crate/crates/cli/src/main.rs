//! Command-line driver: ingest corpora, fit the admixture model, rank
//! sentences with every system, evaluate run files, synthesize noisy
//! relevance judgments, and generate benchmark corpora.

mod commands;
mod config;
mod util;

use clap::Parser;

use commands::Cli;

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<bayesum::Error>() {
        if core.is_numerical() {
            return 3;
        }
        if matches!(core, bayesum::Error::InvalidConfig(_)) {
            return 1;
        }
        return 2;
    }
    if err.downcast_ref::<commands::UsageError>().is_some() {
        return 1;
    }
    2
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };

    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
