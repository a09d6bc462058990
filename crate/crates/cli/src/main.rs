use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use neurodb::LearnMode;
use neurodb_cli::{repl, run_eval, run_script, SessionConfig, EXIT_OK, EXIT_USAGE};

/// Object database with neural network definitions in its query language.
#[derive(Parser, Debug)]
#[command(name = "neurodb", version)]
struct Args {
    /// Snapshot file to load from and save to.
    #[arg(long, value_name = "PATH")]
    db: Option<PathBuf>,
    /// Run this script and exit.
    #[arg(long, value_name = "PATH")]
    script: Option<PathBuf>,
    /// Backward-pass variant.
    #[arg(long, default_value = "paper", value_parser = ["paper", "textbook"])]
    mode: String,
    /// Epochs between training report lines.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    report_interval: u64,
    /// Execute a statement (after `--script`, if given) and exit.
    #[arg(long, value_name = "STATEMENT")]
    eval: Option<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    let mode: LearnMode = args.mode.parse().expect("validated by clap");
    let interactive = args.script.is_none() && args.eval.is_none();
    let config = SessionConfig {
        db_path: args.db,
        script: args.script.clone(),
        mode,
        report_interval: args.report_interval,
        exit_on_error: !interactive,
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match (&args.eval, &args.script) {
        (Some(src), _) => run_eval(src, &config, &mut out, &mut err),
        (None, Some(path)) => run_script(path, &config, &mut out, &mut err),
        (None, None) => repl(&config, &mut io::stdin().lock(), &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
