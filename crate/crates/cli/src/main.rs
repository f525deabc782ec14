mod commands;
mod config;
mod envelope;
mod error;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use commands::{execute, Cli};
use envelope::{digest, render_csv, render_json, render_text, Envelope, Format};
use error::CliError;

fn run(cli: &Cli) -> Result<String, CliError> {
    let name = cli.command.name();
    let common = cli.command.common();
    let start = Instant::now();
    let report = execute(&cli.command)?;
    let envelope = Envelope {
        command: name.to_string(),
        digest: digest(name, &report.inputs),
        outputs: report.outputs,
        diagnostics: report.diagnostics,
        wall_time: start.elapsed().as_secs_f64(),
    };
    log::info!("{name} finished in {:.3}s", envelope.wall_time);
    let rendered = match common.format {
        Format::Json => render_json(&envelope),
        Format::Csv => render_csv(name, report.table.as_ref())?,
        Format::Text => render_text(&envelope),
    };
    if let Some(path) = &common.out {
        std::fs::write(path, render_json(&envelope))
            .map_err(|e| CliError::Io(format!("output {}: {e}", path.display())))?;
    }
    Ok(rendered)
}

fn fail(err: &CliError) -> ExitCode {
    log::error!("{err}");
    println!(
        "{}",
        serde_json::to_string_pretty(&err.to_json()).expect("error serializes")
    );
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THERMOFORMAL_LOG", "off")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Config(e.to_string().trim_end().to_string()));
        }
    };
    match run(&cli) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
