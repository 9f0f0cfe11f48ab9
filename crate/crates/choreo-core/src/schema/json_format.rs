//! The compact JSON schema form.
//!
//! A schema document is an object with two members:
//!
//! ```json
//! {
//!   "qname": "SmartCart.checkout.checkoutRequest",
//!   "root": { "total": "decimal" }
//! }
//! ```
//!
//! `root` maps field names to either a primitive kind name (`"string"`,
//! `"int"`, `"boolean"`, `"decimal"`, `"date"`) or a nested object of the
//! same shape. Member order in `root` is document order and is preserved
//! (it drives deterministic tie-breaking), and duplicate member names are
//! an error — both of which rule out plain JSON maps, so parsing streams
//! object entries in text order.

use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{Map, Value};

use super::{FieldDecl, MessageSchema, PrimitiveKind, QName, SchemaError, TypeNode};

/// A JSON node as written: objects keep entry order and duplicates so the
/// parser can reject the latter explicitly.
enum RawNode {
    Text(String),
    Object(Vec<(String, RawNode)>),
    Other(String),
}

impl<'de> Deserialize<'de> for RawNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NodeVisitor;

        impl<'de> Visitor<'de> for NodeVisitor {
            type Value = RawNode;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a kind name or an object of fields")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<RawNode, E> {
                Ok(RawNode::Text(v.to_string()))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawNode, A::Error> {
                let mut entries = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, RawNode>()? {
                    entries.push((key, value));
                }
                Ok(RawNode::Object(entries))
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<RawNode, E> {
                Ok(RawNode::Other(v.to_string()))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<RawNode, E> {
                Ok(RawNode::Other(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<RawNode, E> {
                Ok(RawNode::Other(v.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<RawNode, E> {
                Ok(RawNode::Other(v.to_string()))
            }

            fn visit_unit<E: de::Error>(self) -> Result<RawNode, E> {
                Ok(RawNode::Other("null".to_string()))
            }

            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<RawNode, A::Error> {
                while seq.next_element::<serde::de::IgnoredAny>()?.is_some() {}
                Ok(RawNode::Other("array".to_string()))
            }
        }

        deserializer.deserialize_any(NodeVisitor)
    }
}

/// Parses a JSON schema document (text of the object described above).
pub fn parse_schema_json(text: &str) -> Result<MessageSchema, SchemaError> {
    let doc: RawNode =
        serde_json::from_str(text).map_err(|e| SchemaError::InvalidJson(e.to_string()))?;
    let entries = match doc {
        RawNode::Object(entries) => entries,
        _ => return Err(SchemaError::InvalidJson("document must be an object".to_string())),
    };

    let mut qname = None;
    let mut root = None;
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("qname", RawNode::Text(text)) if qname.is_none() => {
                qname = Some(QName::parse(&text)?);
            }
            ("root", RawNode::Object(fields)) if root.is_none() => {
                root = Some(parse_record(fields, "root")?);
            }
            ("qname" | "root", _) => {
                return Err(SchemaError::InvalidJson(format!(
                    "member `{key}` is duplicated or has the wrong shape"
                )))
            }
            (other, _) => {
                return Err(SchemaError::InvalidJson(format!(
                    "unknown document member `{other}`"
                )))
            }
        }
    }

    let qname =
        qname.ok_or_else(|| SchemaError::InvalidJson("missing string member `qname`".to_string()))?;
    let root =
        root.ok_or_else(|| SchemaError::InvalidJson("missing object member `root`".to_string()))?;
    MessageSchema::new(qname, TypeNode::Record(root))
}

fn parse_record(
    entries: Vec<(String, RawNode)>,
    context: &str,
) -> Result<Vec<FieldDecl>, SchemaError> {
    let mut fields: Vec<FieldDecl> = Vec::new();
    for (name, value) in entries {
        if fields.iter().any(|f| f.name == name) {
            return Err(SchemaError::DuplicateField {
                name,
                context: context.to_string(),
            });
        }
        let node = match value {
            RawNode::Text(kind_name) => {
                let kind = PrimitiveKind::from_name(&kind_name).ok_or_else(|| {
                    SchemaError::InvalidJson(format!(
                        "unknown kind `{kind_name}` for field `{context}.{name}`"
                    ))
                })?;
                TypeNode::Primitive(kind)
            }
            RawNode::Object(inner) => {
                TypeNode::Record(parse_record(inner, &format!("{context}.{name}"))?)
            }
            RawNode::Other(desc) => {
                return Err(SchemaError::InvalidJson(format!(
                    "field `{context}.{name}` must be a kind name or a nested object, got {desc}"
                )))
            }
        };
        fields.push(FieldDecl { name, node });
    }
    Ok(fields)
}

/// Renders a schema as the JSON document form. Field order is preserved,
/// so the result round-trips through [`parse_schema_json`] unchanged.
pub fn schema_to_json(schema: &MessageSchema) -> Value {
    let mut doc = Map::new();
    doc.insert(
        "qname".to_string(),
        Value::String(schema.qname().to_string()),
    );
    let root = match schema.root() {
        TypeNode::Record(fields) => render_record(fields),
        TypeNode::Primitive(_) => unreachable!("schema roots are records by construction"),
    };
    doc.insert("root".to_string(), Value::Object(root));
    Value::Object(doc)
}

fn render_record(fields: &[FieldDecl]) -> Map<String, Value> {
    let mut map = Map::new();
    for field in fields {
        let value = match &field.node {
            TypeNode::Primitive(kind) => Value::String(kind.name().to_string()),
            TypeNode::Record(inner) => Value::Object(render_record(inner)),
        };
        map.insert(field.name.clone(), value);
    }
    map
}
