use std::io::IsTerminal;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use homext_cli::run::RunError;
use homext_cli::{exit, run, Cli};

fn fail(code: i32, kind: &str, message: &str) -> ! {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    std::process::exit(code)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => fail(exit::VALIDATION_ERROR, "validation", e.to_string().trim()),
    };
    let subscriber = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal());
    if cli.json_logs {
        subscriber.json().init();
    } else {
        subscriber.init();
    }
    let cfg = match cli.resolve() {
        Ok(cfg) => cfg,
        Err(e) => fail(exit::VALIDATION_ERROR, "validation", &e.0),
    };
    match run(&cfg) {
        Ok(outcome) if outcome.all_passed() => {
            println!("{}", cfg.out.join("manifest.json").display());
        }
        Ok(_) => {
            eprintln!("{}", json!({ "error": { "kind": "property_failure", "message": "one or more property suites failed" } }));
            std::process::exit(exit::PROPERTY_FAILURE);
        }
        Err(RunError::Module(e)) => fail(exit::RUNTIME_ERROR, "module", &e.to_string()),
        Err(RunError::Io(e)) => fail(exit::RUNTIME_ERROR, "io", &e),
    }
}
