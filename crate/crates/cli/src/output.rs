//! Serialization helpers: 17-significant-digit floats everywhere, and the run
//! manifest embedded in every JSON document.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub input_digest: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize, input_digest: Option<String>, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            input_digest,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: 0.0,
        }
    }
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Serializes `body` to JSON, attaches `manifest` under the `manifest` key,
/// and renders with fixed float formatting.
pub fn render_json(body: &impl Serialize, manifest: &RunManifest) -> String {
    let mut value = serde_json::to_value(body).unwrap_or(Value::Null);
    let manifest = serde_json::to_value(manifest).unwrap_or(Value::Null);
    match &mut value {
        Value::Object(map) => {
            map.insert("manifest".into(), manifest);
        }
        other => {
            let inner = std::mem::take(other);
            *other = serde_json::json!({ "result": inner, "manifest": manifest });
        }
    }
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    out.push_str(&fmt_f64(x));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // scalar arrays on one line
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, item, indent + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, indent + 1);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes to a file, or to standard output when `target` is `-`.
pub fn write_target(target: &str, contents: &str) -> io::Result<()> {
    if target == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(contents.as_bytes())?;
        lock.flush()
    } else {
        fs::write(target, contents)
    }
}

/// Minimal CSV builder; fields are numbers or plain labels, so no quoting.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0, -1e-300, 123456.789] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn json_is_valid_and_embeds_manifest() {
        let body = serde_json::json!({"a": [1.5, 2.0], "b": {"c": 3}});
        let m = RunManifest::new("test", &serde_json::json!({"k": 1}), None, Some(4));
        let text = render_json(&body, &m);
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["a"][0], 1.5);
        assert_eq!(parsed["b"]["c"], 3);
        assert_eq!(parsed["manifest"]["seed"], 4);
        assert!(text.contains("1.5000000000000000e0"));
    }
}
