//! Message schema model: typed payload structure for service messages.
//!
//! A [`MessageSchema`] is a named tree of records and primitive-kinded
//! leaves, identified by a three-part qualified name
//! `service.operation.message`. Schemas are parsed from an XSD subset
//! ([`xsd`]) or from a compact JSON form ([`json_format`]), and compared
//! structurally by the subtyping check in [`subtype`]: `t1 ⪯ t2` holds when
//! every leaf of `t1` can be assigned, injectively and kind-exactly, to a
//! leaf of `t2`. Nesting shape never constrains the assignment — only the
//! leaves and their kinds do.

mod json_format;
mod subtype;
mod xsd;

pub use json_format::{parse_schema_json, schema_to_json};
pub use subtype::{
    equiv, match_leaves, name_similarity, subtype_of, LeafMatch, MatchConstraints,
};
pub use xsd::{parse_xsd_subset, schema_to_xsd};

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while parsing, validating or serializing schemas.
#[derive(Debug, Error)]
pub enum SchemaError {
    /// The XML document itself is malformed.
    #[error("xml parse error at line {line}, column {col}: {message}")]
    XmlParse {
        line: u32,
        col: u32,
        message: String,
    },
    /// The document is well-formed XML but uses a construct outside the
    /// supported XSD subset (for example `xsd:choice` or an attribute
    /// declaration). Kept distinct from [`SchemaError::XmlParse`] so callers
    /// can report *which* construct is unsupported.
    #[error("unsupported construct `{construct}` at line {line}, column {col}: {detail}")]
    UnsupportedConstruct {
        construct: String,
        line: u32,
        col: u32,
        detail: String,
    },
    /// A schema must declare at least one leaf to describe a payload.
    #[error("schema `{qname}` declares no leaf fields")]
    NoLeaves { qname: String },
    /// Records may not declare two fields of the same name.
    #[error("duplicate field `{name}` in `{context}`")]
    DuplicateField { name: String, context: String },
    /// Field and service names must be plain identifiers.
    #[error("invalid identifier `{name}` in `{context}`")]
    InvalidIdentifier { name: String, context: String },
    /// Qualified names have exactly three dot-separated components.
    #[error("invalid qualified name `{qname}`: expected `service.operation.message`")]
    InvalidQName { qname: String },
    /// The JSON schema form is structurally invalid.
    #[error("invalid schema json: {0}")]
    InvalidJson(String),
    /// A field path does not resolve to a leaf of the schema.
    #[error("path `{path}` does not resolve to a leaf of `{qname}`")]
    PathUnresolved { path: String, qname: String },
    /// Two schemas were registered under one qualified name with different
    /// structure.
    #[error("conflicting definitions registered for `{qname}`")]
    ConflictingDefinition { qname: String },
}

/// The five primitive kinds a leaf field may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    String,
    Int,
    Boolean,
    Decimal,
    Date,
}

impl PrimitiveKind {
    /// The name used in both serialized forms (`xsd:string`, `"string"`).
    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::String => "string",
            PrimitiveKind::Int => "int",
            PrimitiveKind::Boolean => "boolean",
            PrimitiveKind::Decimal => "decimal",
            PrimitiveKind::Date => "date",
        }
    }

    /// Parses a kind name as it appears in the JSON form.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "string" => Some(PrimitiveKind::String),
            "int" => Some(PrimitiveKind::Int),
            "boolean" => Some(PrimitiveKind::Boolean),
            "decimal" => Some(PrimitiveKind::Decimal),
            "date" => Some(PrimitiveKind::Date),
            _ => None,
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A node in a schema tree: either a primitive leaf or a record of named
/// fields. Field order is document order and is semantic (it drives
/// deterministic tie-breaking and payload construction), so records are
/// vectors, not maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeNode {
    Primitive(PrimitiveKind),
    Record(Vec<FieldDecl>),
}

/// A named field inside a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub node: TypeNode,
}

/// A dot-separated path from a schema root to a field, e.g. `product.id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldPath(Vec<String>);

impl FieldPath {
    pub fn new(segments: Vec<String>) -> Self {
        FieldPath(segments)
    }

    /// Parses `product.id` into segments. Rejects empty paths and empty
    /// segments.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        if text.is_empty() {
            return Err(SchemaError::InvalidIdentifier {
                name: text.to_string(),
                context: "field path".to_string(),
            });
        }
        let segments: Vec<String> = text.split('.').map(|s| s.to_string()).collect();
        for seg in &segments {
            if !is_identifier(seg) {
                return Err(SchemaError::InvalidIdentifier {
                    name: seg.clone(),
                    context: format!("field path `{text}`"),
                });
            }
        }
        Ok(FieldPath(segments))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    /// The final segment: the field's own name, used by name similarity.
    pub fn leaf_name(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or_default()
    }

    pub fn child(&self, segment: &str) -> FieldPath {
        let mut segs = self.0.clone();
        segs.push(segment.to_string());
        FieldPath(segs)
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

impl Serialize for FieldPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        FieldPath::parse(&text).map_err(D::Error::custom)
    }
}

/// A qualified message name: exactly `service.operation.message`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QName {
    service: String,
    operation: String,
    message: String,
}

impl QName {
    pub fn new(service: &str, operation: &str, message: &str) -> Result<Self, SchemaError> {
        let q = QName {
            service: service.to_string(),
            operation: operation.to_string(),
            message: message.to_string(),
        };
        for (part, ctx) in [
            (service, "service"),
            (operation, "operation"),
            (message, "message"),
        ] {
            if !is_identifier(part) {
                return Err(SchemaError::InvalidIdentifier {
                    name: part.to_string(),
                    context: format!("{ctx} component of `{q}`"),
                });
            }
        }
        Ok(q)
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let parts: Vec<&str> = text.split('.').collect();
        if parts.len() != 3 {
            return Err(SchemaError::InvalidQName {
                qname: text.to_string(),
            });
        }
        QName::new(parts[0], parts[1], parts[2]).map_err(|_| SchemaError::InvalidQName {
            qname: text.to_string(),
        })
    }

    pub fn service(&self) -> &str {
        &self.service
    }

    pub fn operation(&self) -> &str {
        &self.operation
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.service, self.operation, self.message)
    }
}

impl Serialize for QName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        QName::parse(&text).map_err(D::Error::custom)
    }
}

/// A leaf of a schema: its full path and primitive kind, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub path: FieldPath,
    pub kind: PrimitiveKind,
}

/// A named, validated message schema.
///
/// Invariants, enforced by [`MessageSchema::new`]:
/// - the qualified name has exactly three identifier components;
/// - the root is a record containing at least one leaf;
/// - every record (root included) is non-empty with pairwise-distinct
///   field names, all plain identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSchema {
    qname: QName,
    root: TypeNode,
}

impl MessageSchema {
    pub fn new(qname: QName, root: TypeNode) -> Result<Self, SchemaError> {
        let fields = match &root {
            TypeNode::Record(fields) => fields,
            TypeNode::Primitive(_) => {
                return Err(SchemaError::InvalidJson(format!(
                    "root of `{qname}` must be a record of fields"
                )))
            }
        };
        validate_record(fields, &qname.to_string())?;
        let schema = MessageSchema { qname, root };
        if schema.leaves().is_empty() {
            return Err(SchemaError::NoLeaves {
                qname: schema.qname.to_string(),
            });
        }
        Ok(schema)
    }

    pub fn qname(&self) -> &QName {
        &self.qname
    }

    pub fn root(&self) -> &TypeNode {
        &self.root
    }

    /// Returns the same structure under a different qualified name.
    pub fn renamed(&self, qname: QName) -> MessageSchema {
        MessageSchema {
            qname,
            root: self.root.clone(),
        }
    }

    /// All leaves in document order.
    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        collect_leaves(&self.root, &FieldPath::new(Vec::new()), &mut out);
        out
    }

    /// Resolves a path to its leaf kind. `None` when the path names a
    /// record or nothing at all.
    pub fn leaf_kind(&self, path: &FieldPath) -> Option<PrimitiveKind> {
        let mut node = &self.root;
        for segment in path.segments() {
            match node {
                TypeNode::Record(fields) => {
                    node = &fields.iter().find(|f| &f.name == segment)?.node;
                }
                TypeNode::Primitive(_) => return None,
            }
        }
        match node {
            TypeNode::Primitive(kind) => Some(*kind),
            TypeNode::Record(_) => None,
        }
    }

    /// Document-order position of a leaf path; used for deterministic
    /// ordering decisions. `None` when the path is not a leaf.
    pub fn leaf_position(&self, path: &FieldPath) -> Option<usize> {
        self.leaves().iter().position(|l| &l.path == path)
    }
}

fn collect_leaves(node: &TypeNode, prefix: &FieldPath, out: &mut Vec<Leaf>) {
    match node {
        TypeNode::Primitive(kind) => out.push(Leaf {
            path: prefix.clone(),
            kind: *kind,
        }),
        TypeNode::Record(fields) => {
            for field in fields {
                collect_leaves(&field.node, &prefix.child(&field.name), out);
            }
        }
    }
}

fn validate_record(fields: &[FieldDecl], context: &str) -> Result<(), SchemaError> {
    if fields.is_empty() {
        return Err(SchemaError::InvalidJson(format!(
            "record `{context}` declares no fields"
        )));
    }
    let mut seen = BTreeMap::new();
    for field in fields {
        if !is_identifier(&field.name) {
            return Err(SchemaError::InvalidIdentifier {
                name: field.name.clone(),
                context: context.to_string(),
            });
        }
        if seen.insert(field.name.clone(), ()).is_some() {
            return Err(SchemaError::DuplicateField {
                name: field.name.clone(),
                context: context.to_string(),
            });
        }
        if let TypeNode::Record(inner) = &field.node {
            validate_record(inner, &format!("{context}.{}", field.name))?;
        }
    }
    Ok(())
}

/// `[A-Za-z][A-Za-z0-9_]*` — field names, service names, state names.
pub(crate) fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A single inferred leaf correspondence: `source` (a leaf of the
/// sub-schema) feeds `target` (a leaf of the super-schema), with the
/// name-similarity score that backed the choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source: FieldPath,
    pub target: FieldPath,
    pub score: Score,
}

/// Name-similarity score in tenths (10 = 1.0, 8 = 0.8, 6 = 0.6, 2 = 0.2).
/// Stored as an integer so that equality of totals — the ambiguity test —
/// is exact; rendered as a decimal fraction in serialized artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(u8);

impl Score {
    pub const EXACT: Score = Score(10);
    pub const NORMALIZED: Score = Score(8);
    pub const AFFIX: Score = Score(6);
    pub const FALLBACK: Score = Score(2);

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        let tenths = (v * 10.0).round();
        if !(0.0..=10.0).contains(&tenths) {
            return Err(D::Error::custom(format!("score {v} out of range")));
        }
        Ok(Score(tenths as u8))
    }
}

/// A validated set of leaf correspondences between one sub-schema and one
/// super-schema: sources pairwise distinct, targets pairwise distinct
/// (injectivity), kinds equal pair-for-pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorrespondenceSet {
    pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    /// Validates the correspondence invariants against the two schemas.
    pub fn new(
        pairs: Vec<Correspondence>,
        sub: &MessageSchema,
        sup: &MessageSchema,
    ) -> Result<Self, SchemaError> {
        let mut sources = BTreeMap::new();
        let mut targets = BTreeMap::new();
        for pair in &pairs {
            let source_kind =
                sub.leaf_kind(&pair.source)
                    .ok_or_else(|| SchemaError::PathUnresolved {
                        path: pair.source.to_string(),
                        qname: sub.qname().to_string(),
                    })?;
            let target_kind =
                sup.leaf_kind(&pair.target)
                    .ok_or_else(|| SchemaError::PathUnresolved {
                        path: pair.target.to_string(),
                        qname: sup.qname().to_string(),
                    })?;
            if source_kind != target_kind {
                return Err(SchemaError::InvalidJson(format!(
                    "correspondence {} -> {} joins kinds {source_kind} and {target_kind}",
                    pair.source, pair.target
                )));
            }
            if sources.insert(pair.source.clone(), ()).is_some() {
                return Err(SchemaError::DuplicateField {
                    name: pair.source.to_string(),
                    context: "correspondence sources".to_string(),
                });
            }
            if targets.insert(pair.target.clone(), ()).is_some() {
                return Err(SchemaError::DuplicateField {
                    name: pair.target.to_string(),
                    context: "correspondence targets".to_string(),
                });
            }
        }
        Ok(CorrespondenceSet { pairs })
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The target path assigned to a given source path, if any.
    pub fn target_of(&self, source: &FieldPath) -> Option<&FieldPath> {
        self.pairs
            .iter()
            .find(|p| &p.source == source)
            .map(|p| &p.target)
    }
}

/// All schemas known to a run, keyed by qualified name. Registering the
/// same name twice is allowed only when the structure is identical.
#[derive(Debug, Clone, Default)]
pub struct SchemaRegistry {
    map: BTreeMap<QName, MessageSchema>,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        SchemaRegistry::default()
    }

    pub fn insert(&mut self, schema: MessageSchema) -> Result<(), SchemaError> {
        if let Some(existing) = self.map.get(schema.qname()) {
            if existing.root() != schema.root() {
                return Err(SchemaError::ConflictingDefinition {
                    qname: schema.qname().to_string(),
                });
            }
            return Ok(());
        }
        self.map.insert(schema.qname().clone(), schema);
        Ok(())
    }

    pub fn get(&self, qname: &QName) -> Option<&MessageSchema> {
        self.map.get(qname)
    }

    /// Like [`SchemaRegistry::get`] but with a descriptive error.
    pub fn require(&self, qname: &QName) -> Result<&MessageSchema, SchemaError> {
        self.get(qname).ok_or_else(|| SchemaError::PathUnresolved {
            path: String::new(),
            qname: qname.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QName, &MessageSchema)> {
        self.map.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(kind: PrimitiveKind) -> TypeNode {
        TypeNode::Primitive(kind)
    }

    fn field(name: &str, node: TypeNode) -> FieldDecl {
        FieldDecl {
            name: name.to_string(),
            node,
        }
    }

    fn listing_cd_add_product() -> MessageSchema {
        MessageSchema::new(
            QName::parse("CD_Client_SmartCart.addProduct.addProductRequest").unwrap(),
            TypeNode::Record(vec![
                field(
                    "product",
                    TypeNode::Record(vec![
                        field("id", leaf(PrimitiveKind::String)),
                        field("description", leaf(PrimitiveKind::String)),
                    ]),
                ),
                field("quantity", leaf(PrimitiveKind::Int)),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn leaves_are_document_ordered() {
        let schema = listing_cd_add_product();
        let leaves: Vec<String> = schema.leaves().iter().map(|l| l.path.to_string()).collect();
        assert_eq!(leaves, vec!["product.id", "product.description", "quantity"]);
        assert_eq!(
            schema.leaf_kind(&FieldPath::parse("quantity").unwrap()),
            Some(PrimitiveKind::Int)
        );
        assert_eq!(
            schema.leaf_position(&FieldPath::parse("product.description").unwrap()),
            Some(1)
        );
    }

    #[test]
    fn rejects_duplicate_fields() {
        let err = MessageSchema::new(
            QName::parse("S.op.m").unwrap(),
            TypeNode::Record(vec![
                field("a", leaf(PrimitiveKind::String)),
                field("a", leaf(PrimitiveKind::Int)),
            ]),
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateField { .. }));
    }

    #[test]
    fn rejects_empty_records() {
        let err = MessageSchema::new(
            QName::parse("S.op.m").unwrap(),
            TypeNode::Record(vec![field("a", TypeNode::Record(vec![]))]),
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::InvalidJson(_)));
    }

    #[test]
    fn qname_requires_three_components() {
        assert!(QName::parse("a.b.c").is_ok());
        assert!(matches!(
            QName::parse("a.b"),
            Err(SchemaError::InvalidQName { .. })
        ));
        assert!(matches!(
            QName::parse("a.b.c.d"),
            Err(SchemaError::InvalidQName { .. })
        ));
        assert!(QName::parse("CD_Client_SmartCart.addProduct.addProductRequest").is_ok());
    }

    #[test]
    fn registry_rejects_conflicting_redefinition() {
        let mut reg = SchemaRegistry::new();
        let a = MessageSchema::new(
            QName::parse("S.op.m").unwrap(),
            TypeNode::Record(vec![field("a", leaf(PrimitiveKind::String))]),
        )
        .unwrap();
        let b = MessageSchema::new(
            QName::parse("S.op.m").unwrap(),
            TypeNode::Record(vec![field("a", leaf(PrimitiveKind::Int))]),
        )
        .unwrap();
        reg.insert(a.clone()).unwrap();
        reg.insert(a).unwrap(); // identical re-registration is fine
        assert!(matches!(
            reg.insert(b),
            Err(SchemaError::ConflictingDefinition { .. })
        ));
    }

    #[test]
    fn correspondence_set_enforces_injectivity_and_kinds() {
        let cd = listing_cd_add_product();
        let client = MessageSchema::new(
            QName::parse("Client.addProduct.addProductRequest").unwrap(),
            TypeNode::Record(vec![field(
                "product",
                TypeNode::Record(vec![
                    field("id", leaf(PrimitiveKind::String)),
                    field("description", leaf(PrimitiveKind::String)),
                ]),
            )]),
        )
        .unwrap();
        let ok = CorrespondenceSet::new(
            vec![
                Correspondence {
                    source: FieldPath::parse("product.id").unwrap(),
                    target: FieldPath::parse("product.id").unwrap(),
                    score: Score::EXACT,
                },
                Correspondence {
                    source: FieldPath::parse("product.description").unwrap(),
                    target: FieldPath::parse("product.description").unwrap(),
                    score: Score::EXACT,
                },
            ],
            &client,
            &cd,
        );
        assert!(ok.is_ok());

        // Two sources onto one target breaks injectivity.
        let err = CorrespondenceSet::new(
            vec![
                Correspondence {
                    source: FieldPath::parse("product.id").unwrap(),
                    target: FieldPath::parse("product.id").unwrap(),
                    score: Score::EXACT,
                },
                Correspondence {
                    source: FieldPath::parse("product.description").unwrap(),
                    target: FieldPath::parse("product.id").unwrap(),
                    score: Score::FALLBACK,
                },
            ],
            &client,
            &cd,
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateField { .. }));

        // String source onto int target breaks kind equality.
        let err = CorrespondenceSet::new(
            vec![Correspondence {
                source: FieldPath::parse("product.id").unwrap(),
                target: FieldPath::parse("quantity").unwrap(),
                score: Score::FALLBACK,
            }],
            &client,
            &cd,
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::InvalidJson(_)));
    }

    #[test]
    fn score_serializes_as_fraction() {
        assert_eq!(serde_json::to_string(&Score::NORMALIZED).unwrap(), "0.8");
        let back: Score = serde_json::from_str("0.6").unwrap();
        assert_eq!(back, Score::AFFIX);
    }
}
