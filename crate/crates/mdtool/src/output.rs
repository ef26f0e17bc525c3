//! Result emission: scalar reports as JSON, sweeps as CSV, both carrying
//! a header with the resolved config hash, seed, and artifact version,
//! and both written atomically (temp file + rename). Equal (config, seed)
//! pairs therefore produce byte-identical files.

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// What a command produced: one structured report, rows of a sweep, or a
/// pre-rendered document with a fixed on-disk schema (emitted verbatim).
pub enum Payload {
    Scalar(serde_json::Value),
    Sweep {
        columns: Vec<&'static str>,
        rows: Vec<Vec<String>>,
    },
    Document(String),
}

impl Payload {
    pub fn natural_format(&self) -> Format {
        match self {
            Payload::Scalar(_) => Format::Json,
            Payload::Sweep { .. } => Format::Csv,
            Payload::Document(_) => Format::Json,
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn render(format: Format, seed: u64, config: &serde_json::Value, payload: Payload) -> String {
    // fixed-schema documents carry their own header fields
    if let Payload::Document(text) = payload {
        return text;
    }
    let config_line = serde_json::to_string(config).expect("config serializes");
    let hash = format!("{:016x}", fnv1a64(config_line.as_bytes()));
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "version": VERSION,
                "seed": seed,
                "config_hash": hash,
                "config": config,
                "result": payload_value(payload),
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = String::new();
            text.push_str(&format!("# version: {VERSION}\n"));
            text.push_str(&format!("# seed: {seed}\n"));
            text.push_str(&format!("# config-hash: {hash}\n"));
            text.push_str(&format!("# config: {config_line}\n"));
            match payload {
                Payload::Sweep { columns, rows } => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(&columns).expect("header row");
                    for row in rows {
                        w.write_record(&row).expect("data row");
                    }
                    let bytes = w.into_inner().expect("csv buffer");
                    text.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
                }
                Payload::Scalar(value) => {
                    // flatten the report to (key, value) rows
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["key", "value"]).expect("header row");
                    let mut flat = Vec::new();
                    flatten("", &value, &mut flat);
                    for (k, v) in flat {
                        w.write_record([k, v]).expect("data row");
                    }
                    let bytes = w.into_inner().expect("csv buffer");
                    text.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
                }
                Payload::Document(_) => unreachable!("handled above"),
            }
            text
        }
    }
}

fn payload_value(payload: Payload) -> serde_json::Value {
    match payload {
        Payload::Scalar(v) => v,
        Payload::Sweep { columns, rows } => {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (c, v) in columns.iter().zip(row) {
                        // numbers stay numbers in the JSON rendering
                        let parsed = v
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map(serde_json::Value::Number)
                            .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                        obj.insert((*c).to_string(), parsed);
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            serde_json::Value::Array(objects)
        }
        Payload::Document(_) => unreachable!("handled above"),
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_text(other))),
    }
}

fn scalar_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes the rendered result to `out` (atomically) or to stdout.
pub fn emit(
    out: Option<&Path>,
    format: Format,
    seed: u64,
    config: &serde_json::Value,
    payload: Payload,
) -> anyhow::Result<()> {
    let text = render(format, seed, config, payload);
    write_text(out, &text)
}

pub fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating temp file in {}", dir.display()))?;
            tmp.write_all(text.as_bytes())
                .context("writing result file")?;
            tmp.flush().context("flushing result file")?;
            tmp.persist(path)
                .with_context(|| format!("renaming into {}", path.display()))?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), fnv1a64(b"a"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let config = serde_json::json!({"command": "x", "params": {"a": 1}});
        let mk = || {
            render(
                Format::Csv,
                7,
                &config,
                Payload::Sweep {
                    columns: vec!["a", "b"],
                    rows: vec![vec!["1".into(), "2.5".into()]],
                },
            )
        };
        assert_eq!(mk(), mk());
        assert!(mk().starts_with("# version: "));
    }

    #[test]
    fn scalar_csv_flattens_nested_keys() {
        let text = render(
            Format::Csv,
            0,
            &serde_json::json!({}),
            Payload::Scalar(serde_json::json!({"outer": {"inner": 1.5}, "list": [2, 3]})),
        );
        assert!(text.contains("outer.inner,1.5"));
        assert!(text.contains("list[0],2"));
    }
}
