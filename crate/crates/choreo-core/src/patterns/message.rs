//! Runtime messages: a typed payload tree plus routing headers.

use serde_json::{Map, Number, Value as Json};

use crate::canon;
use crate::schema::{FieldPath, MessageSchema, PrimitiveKind, QName, TypeNode};

use super::PatternError;

/// A payload value. Mirrors [`TypeNode`]: records of named values and
/// five primitive kinds. Decimals and dates are kept as validated strings —
/// exact, comparable, and free of floating-point drift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    Decimal(String),
    Date(String),
    Record(Vec<(String, Value)>),
}

impl Value {
    /// The primitive kind of a leaf value; `None` for records.
    pub fn kind(&self) -> Option<PrimitiveKind> {
        match self {
            Value::Str(_) => Some(PrimitiveKind::String),
            Value::Int(_) => Some(PrimitiveKind::Int),
            Value::Bool(_) => Some(PrimitiveKind::Boolean),
            Value::Decimal(_) => Some(PrimitiveKind::Decimal),
            Value::Date(_) => Some(PrimitiveKind::Date),
            Value::Record(_) => None,
        }
    }

    /// Resolves a field path. Empty paths resolve to `self`.
    pub fn at_path(&self, path: &FieldPath) -> Option<&Value> {
        let mut node = self;
        for segment in path.segments() {
            match node {
                Value::Record(fields) => {
                    node = fields.iter().find(|(n, _)| n == segment).map(|(_, v)| v)?;
                }
                _ => return None,
            }
        }
        Some(node)
    }

    /// Builds a payload for `schema` from a JSON value. Field order is
    /// normalized to schema order; missing fields, extra fields, and
    /// kind-incompatible values are errors. Leaf encodings: `string` and
    /// `boolean` use native JSON, `int` is a JSON integer, `decimal` is a
    /// string of digits with an optional fraction, `date` is a
    /// `YYYY-MM-DD` string.
    pub fn from_json(schema: &MessageSchema, json: &Json) -> Result<Value, PatternError> {
        build(schema.root(), json, "", schema.qname())
    }

    /// Renders the payload as JSON, the inverse of [`Value::from_json`].
    pub fn to_json(&self) -> Json {
        match self {
            Value::Str(s) => Json::String(s.clone()),
            Value::Int(i) => Json::Number(Number::from(*i)),
            Value::Bool(b) => Json::Bool(*b),
            Value::Decimal(d) => Json::String(d.clone()),
            Value::Date(d) => Json::String(d.clone()),
            Value::Record(fields) => {
                let mut map = Map::new();
                for (name, value) in fields {
                    map.insert(name.clone(), value.to_json());
                }
                Json::Object(map)
            }
        }
    }

    /// Checks the payload instantiates the schema exactly: same record
    /// structure, schema field order, matching leaf kinds.
    pub fn validate_against(&self, schema: &MessageSchema) -> Result<(), PatternError> {
        check(self, schema.root(), "", schema.qname())
    }
}

fn payload_error(qname: &QName, detail: String) -> PatternError {
    PatternError::Payload {
        qname: qname.to_string(),
        detail,
    }
}

fn build(node: &TypeNode, json: &Json, at: &str, qname: &QName) -> Result<Value, PatternError> {
    let here = |field: &str| {
        if at.is_empty() {
            field.to_string()
        } else {
            format!("{at}.{field}")
        }
    };
    match node {
        TypeNode::Record(fields) => {
            let obj = json.as_object().ok_or_else(|| {
                payload_error(qname, format!("expected an object at `{at}`"))
            })?;
            for key in obj.keys() {
                if !fields.iter().any(|f| &f.name == key) {
                    return Err(payload_error(
                        qname,
                        format!("unknown field `{}`", here(key)),
                    ));
                }
            }
            let mut out = Vec::with_capacity(fields.len());
            for field in fields {
                let value = obj.get(&field.name).ok_or_else(|| {
                    payload_error(qname, format!("missing field `{}`", here(&field.name)))
                })?;
                out.push((
                    field.name.clone(),
                    build(&field.node, value, &here(&field.name), qname)?,
                ));
            }
            Ok(Value::Record(out))
        }
        TypeNode::Primitive(kind) => {
            let fail = || {
                payload_error(
                    qname,
                    format!("field `{at}` does not encode a {kind} value: {json}"),
                )
            };
            match kind {
                PrimitiveKind::String => json
                    .as_str()
                    .map(|s| Value::Str(s.to_string()))
                    .ok_or_else(fail),
                PrimitiveKind::Int => json.as_i64().map(Value::Int).ok_or_else(fail),
                PrimitiveKind::Boolean => json.as_bool().map(Value::Bool).ok_or_else(fail),
                PrimitiveKind::Decimal => json
                    .as_str()
                    .filter(|s| is_decimal(s))
                    .map(|s| Value::Decimal(s.to_string()))
                    .ok_or_else(fail),
                PrimitiveKind::Date => json
                    .as_str()
                    .filter(|s| is_date(s))
                    .map(|s| Value::Date(s.to_string()))
                    .ok_or_else(fail),
            }
        }
    }
}

fn check(value: &Value, node: &TypeNode, at: &str, qname: &QName) -> Result<(), PatternError> {
    match (value, node) {
        (Value::Record(values), TypeNode::Record(fields)) => {
            if values.len() != fields.len() {
                return Err(payload_error(
                    qname,
                    format!("record at `{at}` has {} fields, schema has {}", values.len(), fields.len()),
                ));
            }
            for ((value_name, value), field) in values.iter().zip(fields) {
                if value_name != &field.name {
                    return Err(payload_error(
                        qname,
                        format!("field `{at}.{value_name}` out of place, expected `{}`", field.name),
                    ));
                }
                let nested = if at.is_empty() {
                    field.name.clone()
                } else {
                    format!("{at}.{}", field.name)
                };
                check(value, &field.node, &nested, qname)?;
            }
            Ok(())
        }
        (leaf, TypeNode::Primitive(kind)) if leaf.kind() == Some(*kind) => Ok(()),
        _ => Err(payload_error(
            qname,
            format!("value at `{at}` does not match the schema"),
        )),
    }
}

/// `-?[0-9]+(\.[0-9]+)?`
fn is_decimal(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    let mut parts = s.splitn(2, '.');
    let int_part = parts.next().unwrap_or("");
    let ok_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    match parts.next() {
        Some(frac) => ok_digits(int_part) && ok_digits(frac),
        None => ok_digits(int_part),
    }
}

/// `YYYY-MM-DD` with plausible month/day ranges.
fn is_date(s: &str) -> bool {
    let bytes = s.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| s[r].bytes().all(|b| b.is_ascii_digit());
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// Routing headers attached to every runtime message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Headers {
    /// Correlation token: messages of one consumer session share it.
    pub correlation_id: String,
    /// Position assigned by a splitter (1-based); `None` otherwise.
    pub sequence_index: Option<u32>,
    /// Who emitted the message (stub, delegate, or adapter id).
    pub sender: String,
    /// Logical tick at which the message was sent.
    pub timestamp: u64,
}

/// A message in flight: qualified name, typed payload, headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeMessage {
    pub qname: QName,
    pub payload: Value,
    pub headers: Headers,
}

impl RuntimeMessage {
    /// Canonical payload digest, as recorded in traces.
    pub fn payload_digest(&self) -> String {
        canon::digest(&self.payload.to_json())
    }
}
