//! Canonical JSON rendering.
//!
//! Every artifact this toolkit writes (mapping reports, CD and adapter
//! specifications, traces, conformance reports) goes through this writer so
//! that repeated runs over the same inputs produce byte-identical files.
//! Canonical form: object keys sorted lexicographically at every level,
//! compact separators, and a single trailing newline. Array order is
//! semantic and preserved as-is.

use serde_json::Value;
use sha2::{Digest, Sha256};

/// Renders a JSON value in canonical form (sorted keys, compact, trailing
/// newline).
pub fn to_canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out.push('\n');
    out
}

/// Renders a JSON value in canonical form without the trailing newline.
/// Used for digest material and for JSONL records, where the line
/// terminator is supplied by the framing.
pub fn to_canonical_line(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Hex-encoded SHA-256 of the canonical rendering of `value`, truncated to
/// 16 hex characters. Stable across runs; used as the payload digest in
/// traces.
pub fn digest(value: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(to_canonical_line(value).as_bytes());
    let full = hex_encode(&hasher.finalize());
    full[..16].to_string()
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&n.to_string()),
        // serde_json's string rendering handles escaping; reuse it rather
        // than maintaining a second escaper.
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string render")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key render"));
                out.push(':');
                write_value(out, &map[*key]);
            }
            out.push('}');
        }
    }
}
