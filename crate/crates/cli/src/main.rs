use std::io::{self, Write};
use std::process::ExitCode;

use ballsbins::{run, Cli, CliError};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut buf = Vec::new();
    let streaming = matches!(cli.command, ballsbins::cli::Command::SimulateSampler(_));
    let result = if streaming {
        let mut out = io::BufWriter::new(io::stdout().lock());
        run(&cli, &mut out).and_then(|()| out.flush().map_err(CliError::from))
    } else {
        // Buffered so that a failure leaves standard output empty.
        run(&cli, &mut buf).and_then(|()| {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&buf)?;
            stdout.flush().map_err(CliError::from)
        })
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ballsbins: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
