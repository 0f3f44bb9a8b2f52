mod args;
mod bounds_cmd;
mod codec;
mod error;
mod format;
mod report;
mod secret_cmd;
mod store;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, OutputFormat, OutputOpts};
use error::Result;
use report::Report;

fn dispatch(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Bounds(a) => bounds_cmd::bounds(a),
        Command::Encode(a) => codec::encode(a),
        Command::Repair(a) => codec::repair(a),
        Command::Reconstruct(a) => codec::reconstruct(a),
        Command::Share(a) => secret_cmd::share(a),
        Command::Verify(a) => verify::verify(a),
    }
}

fn output_opts(cmd: &Command) -> &OutputOpts {
    match cmd {
        Command::Bounds(a) => &a.output,
        Command::Encode(a) => &a.output,
        Command::Repair(a) => &a.output,
        Command::Reconstruct(a) => &a.output,
        Command::Share(a) => &a.output,
        Command::Verify(a) => &a.output,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = output_opts(&cli.command);
    let report = match dispatch(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let text = match opts.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Table => report.to_table(),
    };
    print!("{text}");
    if let Some(path) = &opts.report {
        if let Err(e) = format::write_atomic(path, text.as_bytes()) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    }
    if matches!(cli.command, Command::Verify(_)) && !report.all_pass() {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
