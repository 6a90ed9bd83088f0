use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};
use weightshift::cli::{run, Command, ErrorInfo, Report, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Exact change-of-weights computations on JSON specifications.
#[derive(Parser, Debug)]
#[command(name = "weightshift", version)]
struct Args {
    /// classify, pullback, walls, etale, modify-lattice, refinements, deform, translate or verify
    command: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON payload file; stdin when absent
    #[arg(long)]
    input: Option<PathBuf>,
    /// Suite name for `verify` (default: all)
    #[arg(long)]
    suite: Option<String>,
}

fn input_error(command: &'static str, message: String) -> Report {
    Report {
        schema_version: SCHEMA_VERSION,
        status: "error",
        command,
        result: Value::Null,
        provenance: vec![],
        error: Some(ErrorInfo { code: "parse".into(), message, datum: Value::Null }),
    }
}

fn read_payload(args: &Args, command: Command) -> Result<Value, String> {
    let text = match &args.input {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None if command == Command::Verify => String::new(),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
            s
        }
    };
    let mut payload = if text.trim().is_empty() { json!({}) } else { serde_json::from_str(&text).map_err(|e| e.to_string())? };
    if let Some(s) = &args.suite {
        if command != Command::Verify {
            return Err("--suite only applies to verify".into());
        }
        payload["suite"] = json!(s);
    }
    Ok(payload)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let report = match args.command.parse::<Command>() {
        Err(e) => input_error("unknown", e.to_string()),
        Ok(command) => match read_payload(&args, command) {
            Ok(payload) => run(command, &payload, args.seed),
            Err(msg) => input_error(command.as_str(), msg),
        },
    };
    match args.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    ExitCode::from(report.exit_code() as u8)
}
