//! Deterministic stand-in model speaking the line protocol on stdio. Used by
//! tests and handy for trying the harness without a real classifier.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use deck::protocol::{HelloResponse, PredictResponse, Request, PROTO_VERSION};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "deck-fixture-model")]
struct Args {
    /// Answer every text with this probability.
    #[arg(long)]
    constant: Option<f64>,
    /// JSONL `{"text","p_depressed"}` table; unknown texts get a per-item error.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value = "fixture")]
    name: String,
    #[arg(long, default_value = "1")]
    version: String,
    /// Greet with a line that is not a protocol greeting.
    #[arg(long)]
    malformed_greeting: bool,
    /// Advertise this protocol version.
    #[arg(long)]
    proto: Option<u32>,
    /// Answer every prediction with p_depressed = 1.3.
    #[arg(long)]
    bad_prob: bool,
    /// Reject this exact text with a per-item error.
    #[arg(long)]
    fail_on: Option<String>,
    /// Append every received request line to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Deserialize)]
struct TableLine {
    text: String,
    p_depressed: f64,
}

/// A fixed pseudo-probability derived from the text.
fn hashed(text: &str) -> f64 {
    let d = Sha256::digest(text.as_bytes());
    let v = u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"));
    (v >> 11) as f64 / (1u64 << 53) as f64
}

fn main() -> ExitCode {
    let args = Args::parse();
    let table: Option<HashMap<String, f64>> = match &args.table {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => Some(
                text.lines()
                    .filter(|l| !l.trim().is_empty())
                    .filter_map(|l| serde_json::from_str::<TableLine>(l).ok())
                    .map(|t| (t.text, t.p_depressed))
                    .collect(),
            ),
            Err(e) => {
                eprintln!("deck-fixture-model: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => None,
    };
    let mut log = args
        .log
        .as_ref()
        .and_then(|p| OpenOptions::new().create(true).append(true).open(p).ok());

    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(f) = log.as_mut() {
            let _ = writeln!(f, "{line}");
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(Request::Hello { .. }) if args.malformed_greeting => "HELLO I AM A MODEL".to_string(),
            Ok(Request::Hello { .. }) => serde_json::to_string(&HelloResponse {
                name: args.name.clone(),
                version: args.version.clone(),
                labels: vec!["non_depressed".into(), "depressed".into()],
                proto: Some(args.proto.unwrap_or(PROTO_VERSION)),
            })
            .expect("greetings serialize"),
            Ok(Request::Predict { id, text }) => {
                let response = if args.fail_on.as_deref() == Some(text.as_str()) {
                    PredictResponse::error(id, "rejected by fixture")
                } else if args.bad_prob {
                    PredictResponse::ok(id, 1.3)
                } else if let Some(p) = args.constant {
                    PredictResponse::ok(id, p)
                } else if let Some(t) = &table {
                    match t.get(&text) {
                        Some(&p) => PredictResponse::ok(id, p),
                        None => PredictResponse::error(id, "text not in table"),
                    }
                } else {
                    PredictResponse::ok(id, hashed(&text))
                };
                serde_json::to_string(&response).expect("responses serialize")
            }
            Err(e) => {
                eprintln!("deck-fixture-model: bad request {line:?}: {e}");
                return ExitCode::from(1);
            }
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
