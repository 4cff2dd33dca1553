//! Command-line front end: CSV ingestion, dataset analysis, Monte Carlo
//! scenarios and pivot diagnostics.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use config::RunConfig;
pub use error::{CliError, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

use commands::{deliver, run_analyze, run_pivot_check, run_simulate};
use config::Command;

/// Parse `args`, run the command and return the process exit code. Reports
/// go to `stdout` (or the `--output` file); failures are written to `stderr`
/// as one JSON line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{e}");
            let err = CliError::Usage(e.kind().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    let (outcome, out) = match &cfg.command {
        Command::Analyze(a) => (run_analyze(a), &a.out),
        Command::Simulate(s) => (run_simulate(s, cfg.threads), &s.out),
        Command::PivotCheck(p) => (run_pivot_check(p, cfg.threads), &p.out),
    };
    let fail = |e: CliError, stderr: &mut dyn Write| {
        let _ = writeln!(stderr, "{}", e.to_json());
        e.exit_code()
    };
    match outcome {
        Ok(o) => {
            if let Err(e) = deliver(out, &o.report, stdout) {
                return fail(e, stderr);
            }
            match o.failure {
                Some(e) => fail(e, stderr),
                None => EXIT_OK,
            }
        }
        Err(e) => fail(e, stderr),
    }
}
