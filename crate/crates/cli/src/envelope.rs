//! Result envelopes, input digests and output formats.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub command: String,
    pub digest: String,
    pub outputs: Value,
    pub diagnostics: Value,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time: f64,
}

/// SHA-256 of the canonical JSON of the parsed inputs. Object keys are
/// sorted, so the digest does not depend on formatting or key order in the
/// model file.
pub fn digest(command: &str, inputs: &Value) -> String {
    let canonical = json!({ "command": command, "inputs": inputs });
    let text = serde_json::to_string(&canonical).expect("values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn render_json(envelope: &Envelope) -> String {
    let mut s = serde_json::to_string_pretty(envelope).expect("envelope serializes");
    s.push('\n');
    s
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render_csv(command: &str, table: Option<&Table>) -> Result<String, CliError> {
    let table = table.ok_or_else(|| {
        CliError::Config(format!(
            "--format csv is only available for tabular outputs (gibbs, kms-measure, convergence), not {command}"
        ))
    })?;
    let mut out = table.headers.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.iter().map(scalar).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let joined: Vec<String> = items.iter().map(scalar).collect();
            out.push(format!("{prefix}: [{}]", joined.join(", ")));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push(format!("{prefix}: {}", scalar(other))),
    }
}

pub fn render_text(envelope: &Envelope) -> String {
    let mut lines = vec![
        format!("command: {}", envelope.command),
        format!("digest: {}", envelope.digest),
    ];
    flatten("outputs", &envelope.outputs, &mut lines);
    flatten("diagnostics", &envelope.diagnostics, &mut lines);
    lines.push(format!("wall_time: {}", envelope.wall_time));
    let mut s = lines.join("\n");
    s.push('\n');
    s
}
