//! Data-mapping inference between a service interface and its counterpart.
//!
//! For one attachment — a concrete service facing the coordination delegate
//! of a role pair — this module compares every message the service may
//! exchange with every message the counterpart may exchange in the opposite
//! direction, records each structural subtype relation as a
//! [`DataMapping`], and assembles the results into a [`MappingReport`].
//! Request messages are compared consumer-to-provider in both flows
//! (service-required against counterpart-provided and vice versa), and
//! response messages of request-response operations in the reverse
//! direction. Operation names never gate a mapping; their similarity is
//! recorded as metadata only.
//!
//! User verdicts ([`Hint`]) feed back into inference: `confirm` pins a leaf
//! pair (resolving ties), `reject` removes a candidate pair, possibly
//! dissolving a mapping entirely. A report remembers which message pairs it
//! compared and which hints it absorbed, so [`apply_hints`] can re-evaluate
//! it without re-reading the interfaces: `apply_hints(infer(∅), h)` equals
//! `infer(h)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{
    match_leaves, name_similarity, CorrespondenceSet, FieldPath, MatchConstraints, QName,
    SchemaError, SchemaRegistry, Score,
};

/// Errors raised while inferring mappings or applying hints.
#[derive(Debug, Error)]
pub enum MappingError {
    /// A hint references unknown messages or paths, joins incompatible
    /// kinds, or contradicts another hint.
    #[error("invalid hint: {0}")]
    InvalidHint(String),
    /// An interface declaration is internally inconsistent.
    #[error("invalid interface `{service}`: {detail}")]
    InvalidInterface { service: String, detail: String },
    /// A message schema referenced by an interface is not registered.
    #[error("unknown schema `{qname}` referenced by interface `{service}`")]
    UnknownSchema { qname: String, service: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Whether an operation is offered by the service or expected of its
/// environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Provided,
    Required,
}

/// Message exchange pattern of an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mep {
    #[serde(rename = "one-way")]
    OneWay,
    #[serde(rename = "request-response")]
    RequestResponse,
}

/// One operation of a service interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationSpec {
    pub name: String,
    pub direction: Direction,
    pub mep: Mep,
    /// Request message, named `service.operation.message`.
    pub input: QName,
    /// Response message; present exactly when `mep` is request-response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<QName>,
}

/// A service interface: a named set of operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "RawInterface")]
pub struct InterfaceSpec {
    pub service: String,
    pub operations: Vec<OperationSpec>,
}

/// Serde detour so that deserialized interfaces pass the same validation
/// as constructed ones.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawInterface {
    service: String,
    operations: Vec<OperationSpec>,
}

impl TryFrom<RawInterface> for InterfaceSpec {
    type Error = MappingError;

    fn try_from(raw: RawInterface) -> Result<Self, MappingError> {
        InterfaceSpec::new(&raw.service, raw.operations)
    }
}

impl InterfaceSpec {
    /// Validates: operation names pairwise distinct; response present
    /// exactly for request-response operations; message names qualified by
    /// this service and operation.
    pub fn new(service: &str, operations: Vec<OperationSpec>) -> Result<Self, MappingError> {
        let mut names = BTreeSet::new();
        for op in &operations {
            if !names.insert(op.name.clone()) {
                return Err(MappingError::InvalidInterface {
                    service: service.to_string(),
                    detail: format!("duplicate operation `{}`", op.name),
                });
            }
            match (op.mep, &op.output) {
                (Mep::OneWay, Some(_)) => {
                    return Err(MappingError::InvalidInterface {
                        service: service.to_string(),
                        detail: format!("one-way operation `{}` declares a response", op.name),
                    })
                }
                (Mep::RequestResponse, None) => {
                    return Err(MappingError::InvalidInterface {
                        service: service.to_string(),
                        detail: format!(
                            "request-response operation `{}` lacks a response",
                            op.name
                        ),
                    })
                }
                _ => {}
            }
            for qname in std::iter::once(&op.input).chain(op.output.as_ref()) {
                if qname.service() != service || qname.operation() != op.name {
                    return Err(MappingError::InvalidInterface {
                        service: service.to_string(),
                        detail: format!(
                            "message `{qname}` is not qualified by `{service}.{}`",
                            op.name
                        ),
                    });
                }
            }
        }
        Ok(InterfaceSpec {
            service: service.to_string(),
            operations,
        })
    }

    pub fn operation(&self, name: &str) -> Option<&OperationSpec> {
        self.operations.iter().find(|op| op.name == name)
    }

    /// All message names of the interface, declaration order.
    pub fn messages(&self) -> Vec<QName> {
        let mut out = Vec::new();
        for op in &self.operations {
            out.push(op.input.clone());
            if let Some(output) = &op.output {
                out.push(output.clone());
            }
        }
        out
    }

    /// Checks every referenced schema is registered.
    pub fn validate_schemas(&self, registry: &SchemaRegistry) -> Result<(), MappingError> {
        for qname in self.messages() {
            if registry.get(&qname).is_none() {
                return Err(MappingError::UnknownSchema {
                    qname: qname.to_string(),
                    service: self.service.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Lifecycle status of a mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingStatus {
    Inferred,
    Confirmed,
    Rejected,
    Ambiguous,
}

/// One directed data mapping: the sub-schema message can be transformed
/// into (part of) the super-schema message along `correspondences`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataMapping {
    pub sub: QName,
    pub sup: QName,
    pub status: MappingStatus,
    /// Similarity of the two operation names — metadata only.
    pub op_name_score: Score,
    pub correspondences: CorrespondenceSet,
}

/// A mapping whose leaf assignment tied between distinct maxima. The
/// `mapping` field carries the document-order winner; `candidates` lists
/// every tied assignment (winner first) for a user to pick from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AmbiguousMapping {
    pub mapping: DataMapping,
    pub candidates: Vec<CorrespondenceSet>,
}

/// User verdict on one candidate leaf correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirm,
    Reject,
}

/// A qualified leaf: message name plus field path, written
/// `Service.op.message#field.path`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualifiedLeaf {
    pub qname: QName,
    pub path: FieldPath,
}

impl QualifiedLeaf {
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let (qname, path) = text.split_once('#').ok_or_else(|| {
            MappingError::InvalidHint(format!("`{text}` is not of the form qname#path"))
        })?;
        Ok(QualifiedLeaf {
            qname: QName::parse(qname)
                .map_err(|e| MappingError::InvalidHint(e.to_string()))?,
            path: FieldPath::parse(path)
                .map_err(|e| MappingError::InvalidHint(e.to_string()))?,
        })
    }
}

impl std::fmt::Display for QualifiedLeaf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.qname, self.path)
    }
}

/// One hint line: a verdict on a source-leaf/target-leaf pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Hint {
    pub verdict: Verdict,
    pub source: QualifiedLeaf,
    pub target: QualifiedLeaf,
}

impl std::fmt::Display for Hint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = match self.verdict {
            Verdict::Confirm => "confirm",
            Verdict::Reject => "reject",
        };
        write!(f, "{verdict} {} -> {}", self.source, self.target)
    }
}

/// An ordered set of hints, parsed from the line format:
///
/// ```text
/// # comment
/// confirm Client.setQuantity.setQuantityRequest#quantity -> CD_Client_SmartCart.addProduct.addProductRequest#quantity
/// reject  A.op.m#x -> B.op.n#y
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HintSet {
    hints: Vec<Hint>,
}

impl HintSet {
    pub fn new(mut hints: Vec<Hint>) -> Self {
        hints.sort();
        hints.dedup();
        HintSet { hints }
    }

    pub fn empty() -> Self {
        HintSet::default()
    }

    pub fn hints(&self) -> &[Hint] {
        &self.hints
    }

    pub fn is_empty(&self) -> bool {
        self.hints.is_empty()
    }

    /// Parses the line format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut hints = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: &str| {
                MappingError::InvalidHint(format!("line {}: {detail}", idx + 1))
            };
            let (verdict_word, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err("expected `confirm|reject <source> -> <target>`"))?;
            let verdict = match verdict_word {
                "confirm" => Verdict::Confirm,
                "reject" => Verdict::Reject,
                other => return Err(err(&format!("unknown verdict `{other}`"))),
            };
            let (source_text, target_text) = rest
                .split_once("->")
                .ok_or_else(|| err("expected `<source> -> <target>`"))?;
            hints.push(Hint {
                verdict,
                source: QualifiedLeaf::parse(source_text.trim())
                    .map_err(|e| err(&e.to_string()))?,
                target: QualifiedLeaf::parse(target_text.trim())
                    .map_err(|e| err(&e.to_string()))?,
            });
        }
        Ok(HintSet::new(hints))
    }

    /// Renders back to the line format (sorted, one hint per line).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for hint in &self.hints {
            out.push_str(&hint.to_string());
            out.push('\n');
        }
        out
    }

    /// Merges two hint sets, rejecting contradictions (a confirm and a
    /// reject on the same leaf pair).
    pub fn merged(&self, other: &HintSet) -> Result<HintSet, MappingError> {
        let combined = HintSet::new(
            self.hints
                .iter()
                .chain(other.hints.iter())
                .cloned()
                .collect(),
        );
        let mut seen: BTreeMap<(QualifiedLeaf, QualifiedLeaf), Verdict> = BTreeMap::new();
        for hint in &combined.hints {
            let key = (hint.source.clone(), hint.target.clone());
            if let Some(prev) = seen.insert(key, hint.verdict) {
                if prev != hint.verdict {
                    return Err(MappingError::InvalidHint(format!(
                        "contradictory verdicts for {} -> {}",
                        hint.source, hint.target
                    )));
                }
            }
        }
        Ok(combined)
    }

    /// Validates every hint against the registry: messages known, paths
    /// resolve to leaves, kinds equal.
    pub fn validate(&self, registry: &SchemaRegistry) -> Result<(), MappingError> {
        self.merged(&HintSet::empty())?; // contradiction check
        for hint in &self.hints {
            let describe = |leaf: &QualifiedLeaf| -> Result<_, MappingError> {
                let schema = registry.get(&leaf.qname).ok_or_else(|| {
                    MappingError::InvalidHint(format!("unknown message `{}`", leaf.qname))
                })?;
                schema.leaf_kind(&leaf.path).ok_or_else(|| {
                    MappingError::InvalidHint(format!(
                        "`{}` does not resolve to a leaf of `{}`",
                        leaf.path, leaf.qname
                    ))
                })
            };
            let source_kind = describe(&hint.source)?;
            let target_kind = describe(&hint.target)?;
            if source_kind != target_kind {
                return Err(MappingError::InvalidHint(format!(
                    "{} joins kinds {source_kind} and {target_kind}",
                    hint
                )));
            }
        }
        Ok(())
    }

    /// The constraints relevant to one ordered schema pair.
    fn constraints_for(&self, sub: &QName, sup: &QName) -> MatchConstraints {
        let mut constraints = MatchConstraints::default();
        for hint in &self.hints {
            if &hint.source.qname == sub && &hint.target.qname == sup {
                let pair = (hint.source.path.clone(), hint.target.path.clone());
                match hint.verdict {
                    Verdict::Confirm => constraints.required.push(pair),
                    Verdict::Reject => constraints.forbidden.push(pair),
                }
            }
        }
        constraints
    }

    /// True when some confirm hint addresses the ordered pair.
    fn confirms_pair(&self, sub: &QName, sup: &QName) -> bool {
        self.hints.iter().any(|h| {
            h.verdict == Verdict::Confirm && &h.source.qname == sub && &h.target.qname == sup
        })
    }
}

/// The full mapping analysis of one attachment.
///
/// Completeness invariant: every message of both interfaces appears either
/// in some accepted mapping (as sub or sup) or in `unmapped`; ambiguous and
/// rejected mappings do not count as accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappingReport {
    /// The analyzed service.
    pub service: String,
    /// The counterpart it is being attached to (a coordination delegate in
    /// the synthesis pipeline, but any interface works).
    pub counterpart: String,
    pub mappings: Vec<DataMapping>,
    /// Mappings dissolved by reject hints, kept for audit.
    pub rejected: Vec<DataMapping>,
    pub unmapped: Vec<QName>,
    pub ambiguities: Vec<AmbiguousMapping>,
    /// Every message analyzed (both sides), for re-evaluation.
    pub messages: Vec<QName>,
    /// Ordered message pairs that were compared, with the operation-name
    /// similarity metadata.
    pub compared: Vec<ComparedPair>,
    /// Hints already folded into this report.
    pub hints: HintSet,
}

/// One ordered comparison `sub ⪯? sup` performed during inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparedPair {
    pub sub: QName,
    pub sup: QName,
    pub op_name_score: Score,
}

impl MappingReport {
    /// The accepted mapping for an ordered pair, if any.
    pub fn mapping_for(&self, sub: &QName, sup: &QName) -> Option<&DataMapping> {
        self.mappings
            .iter()
            .find(|m| &m.sub == sub && &m.sup == sup)
    }

    /// True when the message participates in no accepted mapping.
    pub fn is_unmapped(&self, qname: &QName) -> bool {
        self.unmapped.contains(qname)
    }

    /// Messages among `ambiguities` involving the given qname.
    pub fn ambiguities_involving(&self, qname: &QName) -> Vec<&AmbiguousMapping> {
        self.ambiguities
            .iter()
            .filter(|a| &a.mapping.sub == qname || &a.mapping.sup == qname)
            .collect()
    }
}

/// Infers the mapping report for one attachment.
///
/// Comparison surface: for the service-consumes flow, every required
/// request of `service` against every provided request of `counterpart`
/// (both subtype directions), plus response messages in the reverse
/// direction for request-response pairs; symmetrically for the
/// service-provides flow. Hints constrain the leaf assignment; invalid
/// hints are errors.
pub fn infer_mappings(
    service: &InterfaceSpec,
    counterpart: &InterfaceSpec,
    hints: &HintSet,
    registry: &SchemaRegistry,
) -> Result<MappingReport, MappingError> {
    service.validate_schemas(registry)?;
    counterpart.validate_schemas(registry)?;
    hints.validate(registry)?;

    // Ordered comparison pairs, with operation-name metadata, deduplicated.
    let mut compared: BTreeMap<(QName, QName), Score> = BTreeMap::new();
    let mut add_pair = |sub_op: &OperationSpec, sup_op: &OperationSpec, sub: &QName, sup: &QName| {
        compared
            .entry((sub.clone(), sup.clone()))
            .or_insert_with(|| name_similarity(&sub_op.name, &sup_op.name));
    };
    let flows = [(service, counterpart), (counterpart, service)];
    for (consumer, provider) in flows {
        for req in consumer
            .operations
            .iter()
            .filter(|op| op.direction == Direction::Required)
        {
            for prov in provider
                .operations
                .iter()
                .filter(|op| op.direction == Direction::Provided)
            {
                // Requests flow consumer -> provider: compare both subtype
                // directions so later synthesis can pick aggregation
                // (consumer ⪯ provider) or splitting (provider ⪯ consumer).
                add_pair(req, prov, &req.input, &prov.input);
                add_pair(prov, req, &prov.input, &req.input);
                // Responses flow provider -> consumer.
                if let (Some(req_out), Some(prov_out)) = (&req.output, &prov.output) {
                    add_pair(prov, req, prov_out, req_out);
                    add_pair(req, prov, req_out, prov_out);
                }
            }
        }
    }

    let compared: Vec<ComparedPair> = compared
        .into_iter()
        .map(|((sub, sup), op_name_score)| ComparedPair {
            sub,
            sup,
            op_name_score,
        })
        .collect();

    let mut messages: BTreeSet<QName> = BTreeSet::new();
    messages.extend(service.messages());
    messages.extend(counterpart.messages());

    evaluate(
        service.service.clone(),
        counterpart.service.clone(),
        messages.into_iter().collect(),
        compared,
        hints.clone(),
        registry,
    )
}

/// Re-evaluates a report under additional hints. The merged hint set is
/// validated first; contradictions are invalid-hint errors. Applying an
/// empty hint set returns an identical report, and applying the same hints
/// twice is idempotent.
pub fn apply_hints(
    report: &MappingReport,
    hints: &HintSet,
    registry: &SchemaRegistry,
) -> Result<MappingReport, MappingError> {
    let merged = report.hints.merged(hints)?;
    merged.validate(registry)?;
    evaluate(
        report.service.clone(),
        report.counterpart.clone(),
        report.messages.clone(),
        report.compared.clone(),
        merged,
        registry,
    )
}

/// Core evaluation shared by inference and hint application: runs the leaf
/// assignment for every compared pair under the hint constraints and
/// assembles the report.
fn evaluate(
    service: String,
    counterpart: String,
    messages: Vec<QName>,
    compared: Vec<ComparedPair>,
    hints: HintSet,
    registry: &SchemaRegistry,
) -> Result<MappingReport, MappingError> {
    let mut mappings = Vec::new();
    let mut rejected = Vec::new();
    let mut ambiguities = Vec::new();
    let mut mapped_messages: BTreeSet<QName> = BTreeSet::new();

    for pair in &compared {
        let sub_schema = registry.require(&pair.sub)?;
        let sup_schema = registry.require(&pair.sup)?;
        let constraints = hints.constraints_for(&pair.sub, &pair.sup);
        let outcome = match_leaves(sub_schema, sup_schema, &constraints)
            .map_err(|e| MappingError::InvalidHint(e.to_string()))?;

        match outcome {
            Some(m) if m.ambiguous => {
                ambiguities.push(AmbiguousMapping {
                    mapping: DataMapping {
                        sub: pair.sub.clone(),
                        sup: pair.sup.clone(),
                        status: MappingStatus::Ambiguous,
                        op_name_score: pair.op_name_score,
                        correspondences: m.correspondences,
                    },
                    candidates: m.candidates,
                });
            }
            Some(m) => {
                let status = if hints.confirms_pair(&pair.sub, &pair.sup) {
                    MappingStatus::Confirmed
                } else {
                    MappingStatus::Inferred
                };
                mapped_messages.insert(pair.sub.clone());
                mapped_messages.insert(pair.sup.clone());
                mappings.push(DataMapping {
                    sub: pair.sub.clone(),
                    sup: pair.sup.clone(),
                    status,
                    op_name_score: pair.op_name_score,
                    correspondences: m.correspondences,
                });
            }
            None => {
                // No assignment under constraints. When one existed without
                // the rejects, the hints dissolved it: record for audit.
                if !constraints.forbidden.is_empty() {
                    let unconstrained = MatchConstraints {
                        required: constraints.required.clone(),
                        forbidden: Vec::new(),
                    };
                    if let Ok(Some(m)) =
                        match_leaves(sub_schema, sup_schema, &unconstrained)
                    {
                        rejected.push(DataMapping {
                            sub: pair.sub.clone(),
                            sup: pair.sup.clone(),
                            status: MappingStatus::Rejected,
                            op_name_score: pair.op_name_score,
                            correspondences: m.correspondences,
                        });
                    }
                }
            }
        }
    }

    let unmapped: Vec<QName> = messages
        .iter()
        .filter(|m| !mapped_messages.contains(m))
        .cloned()
        .collect();

    Ok(MappingReport {
        service,
        counterpart,
        mappings,
        rejected,
        unmapped,
        ambiguities,
        messages,
        compared,
        hints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::PrimitiveKind;
    use crate::testutil::*;

    fn corr_paths(m: &DataMapping) -> Vec<(String, String)> {
        m.correspondences
            .pairs()
            .iter()
            .map(|p| (p.source.to_string(), p.target.to_string()))
            .collect()
    }

    /// Reject the two tied promotion-code candidates — the verdict a user
    /// gives after testing reveals the correlation is spurious.
    fn promo_reject_hints() -> HintSet {
        HintSet::parse(
            "reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.id\n\
             reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.description\n",
        )
        .unwrap()
    }

    #[test]
    fn client_attachment_without_hints_reports_tie() {
        let report = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &HintSet::empty(),
            &instore_registry(),
        )
        .unwrap();

        // Two clean mappings: the product record and the quantity.
        assert_eq!(report.mappings.len(), 2);
        let add = report
            .mapping_for(
                &qn("Client.addProduct.addProductRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .expect("addProduct mapping");
        assert_eq!(
            corr_paths(add),
            vec![
                ("product.id".into(), "product.id".into()),
                ("product.description".into(), "product.description".into()),
            ]
        );
        let set_q = report
            .mapping_for(
                &qn("Client.setQuantity.setQuantityRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .expect("setQuantity mapping");
        assert_eq!(corr_paths(set_q), vec![("quantity".into(), "quantity".into())]);

        // The promotion code ties between the two string leaves: it is
        // ambiguous, not mapped, and therefore unmapped.
        assert_eq!(report.ambiguities.len(), 1);
        assert_eq!(report.ambiguities[0].candidates.len(), 2);
        assert_eq!(
            report.unmapped,
            vec![qn("Client.setPromotionCode.setPromotionCodeRequest")]
        );
    }

    #[test]
    fn reject_hints_clear_the_tie() {
        let report = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &promo_reject_hints(),
            &instore_registry(),
        )
        .unwrap();
        assert_eq!(report.mappings.len(), 2);
        assert!(report.ambiguities.is_empty());
        assert_eq!(
            report.unmapped,
            vec![qn("Client.setPromotionCode.setPromotionCodeRequest")]
        );
        // The dissolved candidate is kept for audit.
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].status, MappingStatus::Rejected);
    }

    #[test]
    fn smartcart_attachment_maps_both_provider_messages() {
        let report = infer_mappings(
            &smartcart_interface(),
            &cd_interface_toward_smartcart(),
            &HintSet::empty(),
            &instore_registry(),
        )
        .unwrap();

        assert_eq!(report.mappings.len(), 2);
        let amount = report
            .mapping_for(
                &qn("SmartCart.setAmount.setAmountRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .expect("setAmount mapping");
        assert_eq!(corr_paths(amount), vec![("amount".into(), "quantity".into())]);
        assert_eq!(amount.correspondences.pairs()[0].score.tenths(), 2);

        let item = report
            .mapping_for(
                &qn("SmartCart.addItem.addItemRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .expect("addItem mapping");
        assert_eq!(
            corr_paths(item),
            vec![
                ("item.itemCode".into(), "product.id".into()),
                ("item.descr".into(), "product.description".into()),
            ]
        );
        assert!(report.unmapped.is_empty());
        assert!(report.ambiguities.is_empty());
    }

    #[test]
    fn empty_interface_leaves_counterpart_unmapped() {
        let empty = InterfaceSpec::new("Idle", vec![]).unwrap();
        let report = infer_mappings(
            &empty,
            &cd_interface_toward_client(),
            &HintSet::empty(),
            &instore_registry(),
        )
        .unwrap();
        assert!(report.mappings.is_empty());
        // No service-side messages exist; the counterpart's message is
        // unmapped on its side.
        assert_eq!(
            report.unmapped,
            vec![qn("CD_Client_SmartCart.addProduct.addProductRequest")]
        );
    }

    #[test]
    fn apply_hints_equals_inference_with_hints() {
        let registry = instore_registry();
        let base = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &HintSet::empty(),
            &registry,
        )
        .unwrap();
        let direct = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &promo_reject_hints(),
            &registry,
        )
        .unwrap();
        let applied = apply_hints(&base, &promo_reject_hints(), &registry).unwrap();
        assert_eq!(applied, direct);

        // Idempotence and identity.
        let again = apply_hints(&applied, &promo_reject_hints(), &registry).unwrap();
        assert_eq!(again, applied);
        let identity = apply_hints(&base, &HintSet::empty(), &registry).unwrap();
        assert_eq!(identity, base);
    }

    #[test]
    fn confirm_hint_upgrades_status_and_resolves_ties() {
        let registry = instore_registry();
        let confirm = HintSet::parse(
            "confirm SmartCart.setAmount.setAmountRequest#amount -> CD_Client_SmartCart.addProduct.addProductRequest#quantity\n",
        )
        .unwrap();
        let report = infer_mappings(
            &smartcart_interface(),
            &cd_interface_toward_smartcart(),
            &confirm,
            &registry,
        )
        .unwrap();
        let amount = report
            .mapping_for(
                &qn("SmartCart.setAmount.setAmountRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .unwrap();
        assert_eq!(amount.status, MappingStatus::Confirmed);

        // Confirming one side of the promotion-code tie resolves it into a
        // real mapping.
        let pick = HintSet::parse(
            "confirm Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.description\n",
        )
        .unwrap();
        let report = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &pick,
            &registry,
        )
        .unwrap();
        assert!(report.ambiguities.is_empty());
        let promo = report
            .mapping_for(
                &qn("Client.setPromotionCode.setPromotionCodeRequest"),
                &qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            )
            .unwrap();
        assert_eq!(promo.status, MappingStatus::Confirmed);
        assert_eq!(
            corr_paths(promo),
            vec![("promotionCode".into(), "product.description".into())]
        );
    }

    #[test]
    fn invalid_hints_are_rejected() {
        let registry = instore_registry();
        // Unknown message.
        let h = HintSet::parse("reject Nope.x.y#a -> CD_Client_SmartCart.addProduct.addProductRequest#quantity\n").unwrap();
        assert!(matches!(
            infer_mappings(&client_interface(), &cd_interface_toward_client(), &h, &registry),
            Err(MappingError::InvalidHint(_))
        ));
        // Unresolvable path.
        let h = HintSet::parse("reject Client.setQuantity.setQuantityRequest#nope -> CD_Client_SmartCart.addProduct.addProductRequest#quantity\n").unwrap();
        assert!(matches!(
            infer_mappings(&client_interface(), &cd_interface_toward_client(), &h, &registry),
            Err(MappingError::InvalidHint(_))
        ));
        // Kind mismatch.
        let h = HintSet::parse("confirm Client.setQuantity.setQuantityRequest#quantity -> CD_Client_SmartCart.addProduct.addProductRequest#product.id\n").unwrap();
        assert!(matches!(
            infer_mappings(&client_interface(), &cd_interface_toward_client(), &h, &registry),
            Err(MappingError::InvalidHint(_))
        ));
        // Contradiction.
        let h = HintSet::parse(
            "confirm Client.setQuantity.setQuantityRequest#quantity -> CD_Client_SmartCart.addProduct.addProductRequest#quantity\n\
             reject Client.setQuantity.setQuantityRequest#quantity -> CD_Client_SmartCart.addProduct.addProductRequest#quantity\n",
        )
        .unwrap();
        assert!(matches!(
            infer_mappings(&client_interface(), &cd_interface_toward_client(), &h, &registry),
            Err(MappingError::InvalidHint(_))
        ));
    }

    #[test]
    fn hint_line_format_round_trips_and_ignores_comments() {
        let text = "# promotion code verdicts\n\n\
            reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.id\n";
        let set = HintSet::parse(text).unwrap();
        assert_eq!(set.hints().len(), 1);
        let rendered = set.render();
        assert_eq!(HintSet::parse(&rendered).unwrap(), set);
        assert!(HintSet::parse("confirm butwhere\n").is_err());
        assert!(HintSet::parse("decide A.b.c#x -> D.e.f#y\n").is_err());
    }

    #[test]
    fn reports_are_deterministic_and_order_insensitive_to_hints() {
        let registry = instore_registry();
        let a = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &promo_reject_hints(),
            &registry,
        )
        .unwrap();
        let b = infer_mappings(
            &client_interface(),
            &cd_interface_toward_client(),
            &HintSet::parse(
                // Same verdicts, opposite order.
                "reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.description\n\
                 reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode -> CD_Client_SmartCart.addProduct.addProductRequest#product.id\n",
            )
            .unwrap(),
            &registry,
        )
        .unwrap();
        assert_eq!(a, b);
        let ja = serde_json::to_value(&a).unwrap();
        let jb = serde_json::to_value(&b).unwrap();
        assert_eq!(
            crate::canon::to_canonical_string(&ja),
            crate::canon::to_canonical_string(&jb)
        );
    }

    #[test]
    fn completeness_invariant_holds() {
        let registry = instore_registry();
        for (svc, cp, hints) in [
            (client_interface(), cd_interface_toward_client(), HintSet::empty()),
            (client_interface(), cd_interface_toward_client(), promo_reject_hints()),
            (smartcart_interface(), cd_interface_toward_smartcart(), HintSet::empty()),
        ] {
            let report = infer_mappings(&svc, &cp, &hints, &registry).unwrap();
            for message in &report.messages {
                let mapped = report
                    .mappings
                    .iter()
                    .any(|m| &m.sub == message || &m.sup == message);
                let unmapped = report.unmapped.contains(message);
                assert!(
                    mapped ^ unmapped,
                    "{message} must be exactly one of mapped/unmapped"
                );
            }
        }
    }

    #[test]
    fn interface_validation_rejects_inconsistencies() {
        // Duplicate operation name.
        let dup = InterfaceSpec::new(
            "S",
            vec![
                OperationSpec {
                    name: "op".into(),
                    direction: Direction::Required,
                    mep: Mep::OneWay,
                    input: qn("S.op.m"),
                    output: None,
                },
                OperationSpec {
                    name: "op".into(),
                    direction: Direction::Provided,
                    mep: Mep::OneWay,
                    input: qn("S.op.m2"),
                    output: None,
                },
            ],
        );
        assert!(dup.is_err());

        // One-way with a response.
        let bad_mep = InterfaceSpec::new(
            "S",
            vec![OperationSpec {
                name: "op".into(),
                direction: Direction::Required,
                mep: Mep::OneWay,
                input: qn("S.op.m"),
                output: Some(qn("S.op.r")),
            }],
        );
        assert!(bad_mep.is_err());

        // Message not qualified by the service.
        let bad_qname = InterfaceSpec::new(
            "S",
            vec![OperationSpec {
                name: "op".into(),
                direction: Direction::Required,
                mep: Mep::OneWay,
                input: qn("Other.op.m"),
                output: None,
            }],
        );
        assert!(bad_qname.is_err());
    }

    #[test]
    fn response_messages_compare_in_reverse_direction() {
        let mut registry = SchemaRegistry::new();
        for s in [
            schema("Caller.fetch.fetchRequest", vec![leaf("key", PrimitiveKind::String)]),
            schema("Caller.fetch.fetchReply", vec![leaf("value", PrimitiveKind::String)]),
            schema("Store.get.getRequest", vec![leaf("lookupKey", PrimitiveKind::String)]),
            schema("Store.get.getReply", vec![leaf("storedValue", PrimitiveKind::String)]),
        ] {
            registry.insert(s).unwrap();
        }
        let caller = InterfaceSpec::new(
            "Caller",
            vec![OperationSpec {
                name: "fetch".into(),
                direction: Direction::Required,
                mep: Mep::RequestResponse,
                input: qn("Caller.fetch.fetchRequest"),
                output: Some(qn("Caller.fetch.fetchReply")),
            }],
        )
        .unwrap();
        let store = InterfaceSpec::new(
            "Store",
            vec![OperationSpec {
                name: "get".into(),
                direction: Direction::Provided,
                mep: Mep::RequestResponse,
                input: qn("Store.get.getRequest"),
                output: Some(qn("Store.get.getReply")),
            }],
        )
        .unwrap();
        let report =
            infer_mappings(&caller, &store, &HintSet::empty(), &registry).unwrap();
        // Requests map consumer->provider, responses provider->consumer.
        assert!(report
            .mapping_for(&qn("Caller.fetch.fetchRequest"), &qn("Store.get.getRequest"))
            .is_some());
        assert!(report
            .mapping_for(&qn("Store.get.getReply"), &qn("Caller.fetch.fetchReply"))
            .is_some());
        assert!(report.unmapped.is_empty());
    }
}
