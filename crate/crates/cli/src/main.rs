use std::process::ExitCode;

use clap::Parser;
use roughpath_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = run(&cli.command);
    if let Some(e) = &outcome.error {
        eprintln!("roughpath: {e}");
    } else if outcome.code == 1 {
        eprintln!(
            "roughpath: check failed, see the summary in {}",
            outcome
                .files
                .iter()
                .find(|p| p.extension().is_some_and(|x| x == "json"))
                .map_or(String::new(), |p| p.display().to_string())
        );
    }
    ExitCode::from(outcome.code)
}
