//! Parsing and rendering of the supported XSD subset.
//!
//! The subset covers what the interface descriptions in scope actually use:
//! a single `xsd:schema` root whose children are named `xsd:complexType`
//! declarations (each wrapping one `xsd:sequence` of `xsd:element`s) and
//! top-level `xsd:element` declarations. Elements carry either a primitive
//! `type` attribute (`xsd:string`, `xsd:int`, `xsd:boolean`, `xsd:decimal`,
//! `xsd:date`), a reference to a named complex type declared in the same
//! document, or one inline `xsd:complexType` child. Anything else —
//! `xsd:choice`, `xsd:attribute`, unions, facets, foreign primitive types —
//! is rejected with an error naming the construct and its position, never
//! silently skipped.
//!
//! One document describes one message: the schema's qualified name is
//! supplied by the caller (it comes from the interface description that
//! references the file).

use roxmltree::{Document, Node};

use super::{FieldDecl, MessageSchema, PrimitiveKind, QName, SchemaError, TypeNode};

const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema";

/// Parses one XSD-subset document into the message schema named `qname`.
///
/// Fails with a position-carrying error when the XML is malformed, and with
/// an unsupported-construct error (naming the construct) when the document
/// steps outside the subset. Named complex types may reference each other;
/// reference cycles are unsupported (the schema model is a finite tree).
pub fn parse_xsd_subset(text: &str, qname: QName) -> Result<MessageSchema, SchemaError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        SchemaError::XmlParse {
            line: pos.row,
            col: pos.col,
            message: e.to_string(),
        }
    })?;

    let root = doc.root_element();
    if !is_xsd(&root, "schema") {
        return Err(unsupported(
            &root,
            &doc,
            "document root must be xsd:schema",
        ));
    }

    // Named complex types are collected first so that top-level elements and
    // other complex types can reference them regardless of declaration order.
    let mut named_types: Vec<(String, Node)> = Vec::new();
    for child in root.children().filter(Node::is_element) {
        if is_xsd(&child, "complexType") {
            let name = require_attr(&child, &doc, "name")?;
            named_types.push((name, child));
        }
    }

    let mut fields = Vec::new();
    for child in root.children().filter(Node::is_element) {
        if is_xsd(&child, "complexType") {
            let name = require_attr(&child, &doc, "name")?;
            let mut visiting = vec![name.clone()];
            let node = parse_complex_type(&child, &doc, &named_types, &mut visiting)?;
            fields.push(FieldDecl { name, node });
        } else if is_xsd(&child, "element") {
            fields.push(parse_element(&child, &doc, &named_types, &mut Vec::new())?);
        } else {
            return Err(unsupported(
                &child,
                &doc,
                "only top-level xsd:complexType and xsd:element are supported",
            ));
        }
    }

    MessageSchema::new(qname, TypeNode::Record(fields))
}

/// Renders a schema back into the XSD subset. The output round-trips
/// through [`parse_xsd_subset`] to an identical schema: top-level records
/// become named complex types, nested records become inline complex types,
/// and leaves become typed elements. Field order is preserved.
pub fn schema_to_xsd(schema: &MessageSchema) -> String {
    let mut out = String::new();
    out.push_str("<xsd:schema xmlns:xsd=\"http://www.w3.org/2001/XMLSchema\" version=\"1.0\">\n");
    if let TypeNode::Record(fields) = schema.root() {
        for field in fields {
            match &field.node {
                TypeNode::Record(inner) => {
                    out.push_str(&format!("  <xsd:complexType name=\"{}\">\n", field.name));
                    out.push_str("    <xsd:sequence>\n");
                    for f in inner {
                        render_element(&mut out, f, 3);
                    }
                    out.push_str("    </xsd:sequence>\n");
                    out.push_str("  </xsd:complexType>\n");
                }
                TypeNode::Primitive(kind) => {
                    out.push_str(&format!(
                        "  <xsd:element name=\"{}\" type=\"xsd:{}\"/>\n",
                        field.name, kind
                    ));
                }
            }
        }
    }
    out.push_str("</xsd:schema>\n");
    out
}

fn render_element(out: &mut String, field: &FieldDecl, depth: usize) {
    let pad = "  ".repeat(depth);
    match &field.node {
        TypeNode::Primitive(kind) => {
            out.push_str(&format!(
                "{pad}<xsd:element name=\"{}\" type=\"xsd:{}\"/>\n",
                field.name, kind
            ));
        }
        TypeNode::Record(inner) => {
            out.push_str(&format!("{pad}<xsd:element name=\"{}\">\n", field.name));
            out.push_str(&format!("{pad}  <xsd:complexType>\n"));
            out.push_str(&format!("{pad}    <xsd:sequence>\n"));
            for f in inner {
                render_element(out, f, depth + 3);
            }
            out.push_str(&format!("{pad}    </xsd:sequence>\n"));
            out.push_str(&format!("{pad}  </xsd:complexType>\n"));
            out.push_str(&format!("{pad}</xsd:element>\n"));
        }
    }
}

fn is_xsd(node: &Node, local: &str) -> bool {
    node.tag_name().name() == local && node.tag_name().namespace() == Some(XSD_NS)
}

fn position(node: &Node, doc: &Document) -> (u32, u32) {
    let pos = doc.text_pos_at(node.range().start);
    (pos.row, pos.col)
}

fn unsupported(node: &Node, doc: &Document, detail: &str) -> SchemaError {
    let (line, col) = position(node, doc);
    let construct = match node.tag_name().namespace() {
        Some(XSD_NS) => format!("xsd:{}", node.tag_name().name()),
        _ => node.tag_name().name().to_string(),
    };
    SchemaError::UnsupportedConstruct {
        construct,
        line,
        col,
        detail: detail.to_string(),
    }
}

fn require_attr(node: &Node, doc: &Document, attr: &str) -> Result<String, SchemaError> {
    node.attribute(attr)
        .map(str::to_string)
        .ok_or_else(|| unsupported(node, doc, &format!("missing `{attr}` attribute")))
}

/// Parses `<xsd:complexType>` content: exactly one `xsd:sequence` of
/// elements. `visiting` carries the chain of named-type expansions for
/// cycle detection.
fn parse_complex_type(
    node: &Node,
    doc: &Document,
    named: &[(String, Node)],
    visiting: &mut Vec<String>,
) -> Result<TypeNode, SchemaError> {
    let mut sequence = None;
    for child in node.children().filter(Node::is_element) {
        if is_xsd(&child, "sequence") && sequence.is_none() {
            sequence = Some(child);
        } else {
            return Err(unsupported(
                &child,
                doc,
                "complexType must contain exactly one xsd:sequence",
            ));
        }
    }
    let sequence = sequence.ok_or_else(|| {
        unsupported(node, doc, "complexType must contain exactly one xsd:sequence")
    })?;

    let mut fields = Vec::new();
    for child in sequence.children().filter(Node::is_element) {
        if !is_xsd(&child, "element") {
            return Err(unsupported(
                &child,
                doc,
                "xsd:sequence may contain only xsd:element declarations",
            ));
        }
        fields.push(parse_element(&child, doc, named, visiting)?);
    }
    Ok(TypeNode::Record(fields))
}

fn parse_element(
    node: &Node,
    doc: &Document,
    named: &[(String, Node)],
    visiting: &mut Vec<String>,
) -> Result<FieldDecl, SchemaError> {
    let name = require_attr(node, doc, "name")?;

    if let Some(type_attr) = node.attribute("type") {
        if let Some(rest) = type_attr.strip_prefix("xsd:") {
            let kind = PrimitiveKind::from_name(rest)
                .ok_or_else(|| unsupported(node, doc, &format!("primitive type `{type_attr}`")))?;
            return Ok(FieldDecl {
                name,
                node: TypeNode::Primitive(kind),
            });
        }
        // A bare type name references a named complexType in this document.
        if visiting.iter().any(|v| v == type_attr) {
            return Err(unsupported(
                node,
                doc,
                &format!(
                    "recursive type reference `{}`",
                    {
                        let mut chain = visiting.clone();
                        chain.push(type_attr.to_string());
                        chain.join(" -> ")
                    }
                ),
            ));
        }
        let referenced = named
            .iter()
            .find(|(n, _)| n == type_attr)
            .map(|(_, n)| *n)
            .ok_or_else(|| {
                unsupported(node, doc, &format!("unknown type reference `{type_attr}`"))
            })?;
        visiting.push(type_attr.to_string());
        let resolved = parse_complex_type(&referenced, doc, named, visiting)?;
        visiting.pop();
        return Ok(FieldDecl {
            name,
            node: resolved,
        });
    }

    // No type attribute: the element must wrap exactly one inline complexType.
    let mut inline = None;
    for child in node.children().filter(Node::is_element) {
        if is_xsd(&child, "complexType") && inline.is_none() {
            inline = Some(child);
        } else {
            return Err(unsupported(
                &child,
                doc,
                "element without a type attribute must wrap one inline xsd:complexType",
            ));
        }
    }
    let inline = inline.ok_or_else(|| {
        unsupported(
            node,
            doc,
            "element needs a type attribute or an inline xsd:complexType",
        )
    })?;
    Ok(FieldDecl {
        name,
        node: parse_complex_type(&inline, doc, named, visiting)?,
    })
}
