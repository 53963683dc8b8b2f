mod args;
mod commands;
mod error;

use std::fs;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use polyhe_core::CoreError;
use serde_json::{json, Map, Value};

use args::{Cli, Command, Format};
use commands::Artifact;
use error::{exit_code, Result};

/// Flat object of every resolved flag, global ones included.
fn resolved_config(cli: &Cli) -> Value {
    let mut map = Map::new();
    for part in [serde_json::to_value(&cli.command), serde_json::to_value(&cli.global)] {
        if let Ok(Value::Object(m)) = part {
            map.extend(m);
        }
    }
    Value::Object(map)
}

fn render(cli: &Cli, art: &Artifact) -> String {
    let config = resolved_config(cli);
    match cli.global.format {
        Format::Json => {
            let doc = json!({ "config": config, "result": art.result });
            let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
            s.push('\n');
            s
        }
        Format::Csv => format!("# config: {config}\n{}", art.csv),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let art = match &cli.command {
        Command::Fit(a) => commands::fit(a)?,
        Command::Verify(a) => commands::verify(a)?,
        Command::Fold(a) => commands::fold(a, g)?,
        Command::Infer(a) => commands::infer(a, g)?,
        Command::Bench(a) => commands::bench(a, g)?,
        Command::Params(a) => commands::params(a)?,
        Command::Synth(a) => commands::synth(a, g)?,
    };
    let text = render(cli, &art);
    match &g.output {
        Some(path) => fs::write(path, text).map_err(|source| CoreError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => print!("{text}"),
    }
    eprintln!("{}", art.summary);
    match art.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
