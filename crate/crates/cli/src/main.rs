mod args;
mod commands;
mod runctx;

use args::{Cli, Command};
use clap::Parser;
use std::process::ExitCode;

fn thread_count(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| {
        std::env::var("ZYMEBENCH_THREADS").ok().and_then(|v| v.parse().ok())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = thread_count(&cli) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Split(a) => commands::split(a),
        Command::MineNegatives(a) => commands::mine_negatives_cmd(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Score(a) => commands::score(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Report(a) => commands::report(a),
        Command::GenCorpus(a) => commands::gen_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
