//! Command-line front end for the `szbf` verification toolkit.
//!
//! Exit codes: 0 when every requested check passed (or a run completed with no
//! exit observed), 1 when a check was refuted, inconclusive, or an exit was
//! observed, 2 on usage, input or format errors. `--seed` defaults to 0.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod error;
pub mod render;

use args::{Cli, Command, ReportArgs};
use commands::Outcome;
use error::CliError;

/// Runs `argv` (including the program name) against the process streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let rendered = e.to_string();
            let head: Vec<&str> = rendered.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            let _ = writeln!(stderr, "szbf: {}", head.join(" ").trim_start_matches("error: "));
            return 2;
        }
    };
    match dispatch(&cli.command, stdout) {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "szbf: {msg}");
            2
        }
    }
}

fn dispatch(command: &Command, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    match command {
        Command::Check(a) => commands::check(a, stdout),
        Command::Lemma1(a) => commands::lemma1(a, stdout),
        Command::Simulate(a) => commands::simulate(a, stdout, true),
        Command::ExitProb(a) => commands::simulate(a, stdout, false),
        Command::Stability(a) => commands::stability(a, stdout),
        Command::Report(a) => report(a, stdout),
    }
}

fn report(args: &ReportArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    if args.inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one JSON input".into()));
    }
    let mut sections = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Report(format!("{}: not valid JSON: {e}", path.display())))?;
        sections.push(render::render_one(&path.display().to_string(), &doc)?);
    }
    let summary = sections.join("\n");
    match &args.out {
        Some(p) => std::fs::write(p, summary).map_err(|e| CliError::io(p, e))?,
        None => stdout.write_all(summary.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?,
    }
    Ok(Outcome::Passed)
}
