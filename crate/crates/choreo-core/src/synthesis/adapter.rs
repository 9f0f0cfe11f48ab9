//! Pattern selection: turning one attachment's mapping report into an
//! executable adapter.
//!
//! An attachment joins a concrete service to a coordination delegate.
//! Messages flow in up to two directions — service toward delegate and
//! delegate toward service — and each direction is planned with the
//! same fixed rule ladder:
//!
//! 1. **equivalence** — a sent message that covers an expected message
//!    leaf-for-leaf is rebound (identical paths) or reshaped by a
//!    single-part splitter (renamed paths);
//! 2. **aggregation** — two or more sent messages whose correspondences
//!    jointly and disjointly cover one expected message are merged, in
//!    the sender protocol's first-send order;
//! 3. **splitting** — one sent message that carries several expected
//!    messages is split, parts ordered by their first source leaf, with
//!    a resequencer appended when the receiver's protocol wants the
//!    parts in a different order;
//! 4. anything the service still sends that nothing consumes is
//!    dropped by a leading message filter — delegate traffic, by
//!    contrast, must never be dropped, so an unconsumed delegate
//!    message fails synthesis;
//! 5. an expected delegate message nothing can produce fails synthesis,
//!    naming the first uncovered leaf.
//!
//! The resulting chain executes stages in filter, aggregator, splitter,
//! resequencer order; stages act on disjoint message names, so this
//! also fixes the stage layout inside the artifact.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::mapping::{DataMapping, Direction, InterfaceSpec, MappingReport, MappingStatus, Mep};
use crate::patterns::{
    validate_chain, AggregatorCfg, CorrelationKey, FilterCfg, MergeSource, PathEdge,
    PatternInstance, ResequencerCfg, SplitPart, SplitterCfg,
};
use crate::schema::{FieldPath, QName, SchemaRegistry};

use super::protocol::{Polarity, ProtocolSpec};
use super::SynthesisError;

/// One side of an attachment: an interface plus its behavioral protocol.
#[derive(Debug, Clone, Copy)]
pub struct AttachmentSide<'a> {
    pub interface: &'a InterfaceSpec,
    pub protocol: &'a ProtocolSpec,
}

/// Routing entry: invoking `operation` on `service` feeds `message`
/// into the adapter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InboundRule {
    pub service: String,
    pub operation: String,
    pub message: QName,
}

/// Routing entry: a chain output (or pass-through) named `message` is
/// delivered to `service` as an invocation of `operation`, rewritten to
/// `deliver_as`. `message != deliver_as` marks a pure rebind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutboundRule {
    pub message: QName,
    pub service: String,
    pub operation: String,
    pub deliver_as: QName,
}

/// A synthesized adapter: the pattern chain plus the routing tables
/// that tie it to its two sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdapterSpec {
    pub id: String,
    pub consumer_side: String,
    pub provider_side: String,
    pub chain: Vec<PatternInstance>,
    pub inbound: Vec<InboundRule>,
    pub outbound: Vec<OutboundRule>,
}

impl AdapterSpec {
    /// The outbound rule for a chain output, if any.
    pub fn route_for(&self, message: &QName) -> Option<&OutboundRule> {
        self.outbound.iter().find(|r| &r.message == message)
    }

    /// True when the adapter accepts this message from a service.
    pub fn accepts(&self, message: &QName) -> bool {
        self.inbound.iter().any(|r| &r.message == message)
    }

    /// Consistency check against the registry — used on loaded artifacts
    /// and as a final guard after selection.
    pub fn validate(&self, registry: &SchemaRegistry) -> Result<(), SynthesisError> {
        let mut chain = self.chain.clone();
        validate_chain(&mut chain, registry)?;
        let invalid = |detail: String| SynthesisError::InvalidAdapter {
            id: self.id.clone(),
            detail,
        };
        let mut seen = BTreeSet::new();
        for rule in &self.inbound {
            registry.require(&rule.message)?;
            if !seen.insert(&rule.message) {
                return Err(invalid(format!("duplicate inbound message `{}`", rule.message)));
            }
        }
        let mut seen = BTreeSet::new();
        for rule in &self.outbound {
            registry.require(&rule.message)?;
            registry.require(&rule.deliver_as)?;
            if !seen.insert(&rule.message) {
                return Err(invalid(format!("duplicate outbound message `{}`", rule.message)));
            }
        }
        Ok(())
    }
}

/// Everything one direction of an attachment contributes to the adapter.
struct DirectionPlan {
    aggregators: Vec<AggregatorCfg>,
    splitters: Vec<(SplitterCfg, Option<ResequencerCfg>)>,
    drops: Vec<QName>,
    inbound: Vec<InboundRule>,
    outbound: Vec<OutboundRule>,
    sends: usize,
}

/// Builds the adapter for one attachment from its mapping report. The
/// `service` side is the concrete service; the `delegate` side is the
/// coordination delegate's face toward it (but any interface/protocol
/// pair works — the delegate side is simply the one whose traffic must
/// be fully adapted).
pub fn select_patterns(
    adapter_id: &str,
    report: &MappingReport,
    service: AttachmentSide<'_>,
    delegate: AttachmentSide<'_>,
    registry: &SchemaRegistry,
) -> Result<AdapterSpec, SynthesisError> {
    if report.service != service.interface.service
        || report.counterpart != delegate.interface.service
    {
        return Err(SynthesisError::InvalidAdapter {
            id: adapter_id.to_string(),
            detail: format!(
                "mapping report covers `{}` against `{}`, not this attachment",
                report.service, report.counterpart
            ),
        });
    }
    if let Some(first) = report.ambiguities.first() {
        return Err(SynthesisError::Ambiguous {
            service: report.service.clone(),
            counterpart: report.counterpart.clone(),
            count: report.ambiguities.len(),
            first: first.mapping.sub.to_string(),
        });
    }
    for side in [&service, &delegate] {
        for op in &side.interface.operations {
            if op.mep == Mep::RequestResponse {
                return Err(SynthesisError::Unsupported {
                    service: side.interface.service.clone(),
                    operation: op.name.clone(),
                    detail: "request-response operations cannot be adapted; model the \
                             reply as its own one-way interaction"
                        .to_string(),
                });
            }
        }
    }

    // Service toward delegate: the service may send extra traffic (it
    // gets filtered), but every delegate expectation must be met.
    let dir_a = plan_direction(report, &service, &delegate, false, true, registry)?;
    // Delegate toward service: every delegate message must land, while
    // unused provided operations of the service are fine.
    let dir_b = plan_direction(report, &delegate, &service, true, false, registry)?;

    let mut chain = Vec::new();
    let mut drops = dir_a.drops.clone();
    drops.extend(dir_b.drops.iter().cloned());
    if !drops.is_empty() {
        chain.push(PatternInstance::MessageFilter(FilterCfg { drop: drops }));
    }
    for agg in dir_a.aggregators.iter().chain(dir_b.aggregators.iter()) {
        chain.push(PatternInstance::Aggregator(agg.clone()));
    }
    let mut resequencers = Vec::new();
    for (split, reseq) in dir_a.splitters.iter().chain(dir_b.splitters.iter()) {
        chain.push(PatternInstance::Splitter(split.clone()));
        if let Some(r) = reseq {
            resequencers.push(PatternInstance::Resequencer(r.clone()));
        }
    }
    chain.extend(resequencers);
    validate_chain(&mut chain, registry)?;

    let service_initiates = dir_a.sends > 0;
    let (consumer_side, provider_side) = if service_initiates {
        (service.interface.service.clone(), delegate.interface.service.clone())
    } else {
        (delegate.interface.service.clone(), service.interface.service.clone())
    };

    let spec = AdapterSpec {
        id: adapter_id.to_string(),
        consumer_side,
        provider_side,
        chain,
        inbound: dir_a.inbound.into_iter().chain(dir_b.inbound).collect(),
        outbound: dir_a.outbound.into_iter().chain(dir_b.outbound).collect(),
    };
    spec.validate(registry)?;
    Ok(spec)
}

fn plan_direction(
    report: &MappingReport,
    sender: &AttachmentSide<'_>,
    receiver: &AttachmentSide<'_>,
    sender_strict: bool,
    receiver_strict: bool,
    registry: &SchemaRegistry,
) -> Result<DirectionPlan, SynthesisError> {
    let sender_sent = ordered_messages(sender, Direction::Required, Polarity::Send);
    let receiver_expected = ordered_messages(receiver, Direction::Provided, Polarity::Receive);

    let pool: Vec<&DataMapping> = report
        .mappings
        .iter()
        .filter(|m| matches!(m.status, MappingStatus::Inferred | MappingStatus::Confirmed))
        .collect();

    let mut claimed: BTreeSet<QName> = BTreeSet::new();
    let mut produced: BTreeSet<QName> = BTreeSet::new();
    let mut aggregators = Vec::new();
    let mut splitters: Vec<(SplitterCfg, Option<ResequencerCfg>)> = Vec::new();
    // expected message → the sent message rebound onto it
    let mut rebinds: BTreeMap<QName, QName> = BTreeMap::new();

    // Rules 1 and 2, per expected message in the receiver's own order.
    for sup in &receiver_expected {
        let sup_leaves: Vec<FieldPath> =
            registry.require(sup)?.leaves().into_iter().map(|l| l.path).collect();

        let equivalent = sender_sent.iter().find_map(|sub| {
            if claimed.contains(sub) {
                return None;
            }
            pool.iter()
                .find(|m| &m.sub == sub && &m.sup == sup)
                .filter(|m| m.correspondences.pairs().len() == sup_leaves.len())
        });
        if let Some(mapping) = equivalent {
            claimed.insert(mapping.sub.clone());
            produced.insert(sup.clone());
            let identical =
                mapping.correspondences.pairs().iter().all(|p| p.source == p.target);
            if identical {
                rebinds.insert(sup.clone(), mapping.sub.clone());
            } else {
                splitters.push((
                    SplitterCfg {
                        source: mapping.sub.clone(),
                        parts: vec![SplitPart {
                            target: sup.clone(),
                            path_map: forward_edges(mapping),
                        }],
                    },
                    None,
                ));
            }
            continue;
        }

        let fragments: Vec<&DataMapping> = sender_sent
            .iter()
            .filter(|sub| !claimed.contains(*sub))
            .filter_map(|sub| pool.iter().find(|m| &m.sub == sub && &m.sup == sup))
            .copied()
            .collect();
        if fragments.len() >= 2 {
            let mut covered: BTreeMap<&FieldPath, &QName> = BTreeMap::new();
            for mapping in &fragments {
                for pair in mapping.correspondences.pairs() {
                    if let Some(other) = covered.insert(&pair.target, &mapping.sub) {
                        return Err(SynthesisError::Conflict {
                            message: sup.to_string(),
                            leaf: pair.target.to_string(),
                            detail: format!("both `{other}` and `{}` map onto it", mapping.sub),
                        });
                    }
                }
            }
            if sup_leaves.iter().all(|leaf| covered.contains_key(leaf)) {
                aggregators.push(AggregatorCfg {
                    expected: fragments.iter().map(|m| m.sub.clone()).collect(),
                    target: sup.clone(),
                    merge_map: fragments
                        .iter()
                        .map(|m| MergeSource {
                            source: m.sub.clone(),
                            path_map: forward_edges(m),
                        })
                        .collect(),
                    correlation: CorrelationKey::Header,
                });
                for mapping in &fragments {
                    claimed.insert(mapping.sub.clone());
                }
                produced.insert(sup.clone());
            }
            // An incomplete fragment set is not an error yet: the
            // expected message may still be produced by splitting, and
            // rule 5 reports it precisely otherwise.
        }
    }

    // Rule 3: a sent message carrying several expected ones.
    for source in &sender_sent {
        if claimed.contains(source) {
            continue;
        }
        let mut parts: Vec<&DataMapping> = pool
            .iter()
            .filter(|m| {
                &m.sup == source
                    && receiver_expected.contains(&m.sub)
                    && !produced.contains(&m.sub)
            })
            .copied()
            .collect();
        if parts.is_empty() {
            continue;
        }
        let source_schema = registry.require(source)?;
        parts.sort_by_key(|m| {
            m.correspondences
                .pairs()
                .iter()
                .filter_map(|p| source_schema.leaf_position(&p.target))
                .min()
                .unwrap_or(usize::MAX)
        });
        let emission: Vec<QName> = parts.iter().map(|m| m.sub.clone()).collect();
        let splitter = SplitterCfg {
            source: source.clone(),
            parts: parts
                .iter()
                .map(|m| SplitPart {
                    target: m.sub.clone(),
                    path_map: inverted_edges(m),
                })
                .collect(),
        };
        let receive_order: Vec<QName> = receiver
            .protocol
            .first_message_order(Polarity::Receive)
            .into_iter()
            .filter(|q| emission.contains(q))
            .collect();
        let resequencer = if receive_order.len() == emission.len() && receive_order != emission
        {
            Some(ResequencerCfg { order: receive_order })
        } else {
            None
        };
        claimed.insert(source.clone());
        for mapping in &parts {
            produced.insert(mapping.sub.clone());
        }
        splitters.push((splitter, resequencer));
    }

    // Rule 4: leftovers on the sending side.
    let drops: Vec<QName> =
        sender_sent.iter().filter(|q| !claimed.contains(*q)).cloned().collect();
    if sender_strict {
        if let Some(orphan) = drops.first() {
            let leaf = first_unconnected_leaf(orphan, &pool, registry)?;
            return Err(SynthesisError::Unsatisfiable {
                message: orphan.to_string(),
                leaf,
            });
        }
    }

    // Rule 5: expectations nothing produces.
    if receiver_strict {
        for sup in &receiver_expected {
            if produced.contains(sup) {
                continue;
            }
            let covered: BTreeSet<&FieldPath> = pool
                .iter()
                .filter(|m| &m.sup == sup)
                .flat_map(|m| m.correspondences.pairs().iter().map(|p| &p.target))
                .collect();
            let leaves = registry.require(sup)?.leaves();
            match leaves.iter().find(|l| !covered.contains(&l.path)) {
                Some(leaf) => {
                    return Err(SynthesisError::Unsatisfiable {
                        message: sup.to_string(),
                        leaf: leaf.path.to_string(),
                    })
                }
                None => {
                    return Err(SynthesisError::Conflict {
                        message: sup.to_string(),
                        leaf: leaves[0].path.to_string(),
                        detail: "its mapped sources are partial or already consumed by \
                                 another pattern"
                            .to_string(),
                    })
                }
            }
        }
    }

    let inbound = sender
        .interface
        .operations
        .iter()
        .filter(|op| op.direction == Direction::Required)
        .map(|op| InboundRule {
            service: sender.interface.service.clone(),
            operation: op.name.clone(),
            message: op.input.clone(),
        })
        .collect();

    let mut outbound = Vec::new();
    for sup in &receiver_expected {
        let incoming = match rebinds.get(sup) {
            Some(sub) => sub.clone(),
            None if produced.contains(sup) => sup.clone(),
            None => continue,
        };
        let op = receiver
            .interface
            .operations
            .iter()
            .find(|o| &o.input == sup)
            .expect("expected messages come from the receiver interface");
        outbound.push(OutboundRule {
            message: incoming,
            service: receiver.interface.service.clone(),
            operation: op.name.clone(),
            deliver_as: sup.clone(),
        });
    }

    Ok(DirectionPlan {
        aggregators,
        splitters,
        drops,
        inbound,
        outbound,
        sends: sender_sent.len(),
    })
}

/// Request messages of one direction, ordered by the protocol's
/// first-occurrence order with interface declaration order as the
/// fallback for operations the protocol never mentions.
fn ordered_messages(
    side: &AttachmentSide<'_>,
    direction: Direction,
    polarity: Polarity,
) -> Vec<QName> {
    let declared: Vec<QName> = side
        .interface
        .operations
        .iter()
        .filter(|op| op.direction == direction)
        .map(|op| op.input.clone())
        .collect();
    let mut order: Vec<QName> = side
        .protocol
        .first_message_order(polarity)
        .into_iter()
        .filter(|q| declared.contains(q))
        .collect();
    for qname in declared {
        if !order.contains(&qname) {
            order.push(qname);
        }
    }
    order
}

/// Correspondences as sub→sup copy edges (for merging into the sup).
fn forward_edges(mapping: &DataMapping) -> Vec<PathEdge> {
    mapping
        .correspondences
        .pairs()
        .iter()
        .map(|p| PathEdge { from: p.source.clone(), to: p.target.clone() })
        .collect()
}

/// Correspondences as sup→sub copy edges (for carving the sub out of
/// the sup).
fn inverted_edges(mapping: &DataMapping) -> Vec<PathEdge> {
    mapping
        .correspondences
        .pairs()
        .iter()
        .map(|p| PathEdge { from: p.target.clone(), to: p.source.clone() })
        .collect()
}

/// For an unconsumable sent message: the first leaf with no
/// correspondence anywhere, or the first leaf when every leaf is
/// individually mapped but the message as a whole found no pattern.
fn first_unconnected_leaf(
    orphan: &QName,
    pool: &[&DataMapping],
    registry: &SchemaRegistry,
) -> Result<String, SynthesisError> {
    let mut connected: BTreeSet<&FieldPath> = BTreeSet::new();
    for mapping in pool {
        if &mapping.sub == orphan {
            connected.extend(mapping.correspondences.pairs().iter().map(|p| &p.source));
        }
        if &mapping.sup == orphan {
            connected.extend(mapping.correspondences.pairs().iter().map(|p| &p.target));
        }
    }
    let leaves = registry.require(orphan)?.leaves();
    Ok(leaves
        .iter()
        .find(|l| !connected.contains(&l.path))
        .unwrap_or(&leaves[0])
        .path
        .to_string())
}

/// Canonical JSON rendering of an adapter.
pub fn emit_adapter(spec: &AdapterSpec) -> String {
    let value = serde_json::to_value(spec).expect("adapter specs serialize");
    crate::canon::to_canonical_string(&value)
}

/// Human-readable synthesis audit for one adapter: exactly one `rule:`
/// line per chain stage and per rebind, and one `corr:` line per leaf
/// correspondence a rule consumes.
pub fn adapter_report(spec: &AdapterSpec, mapping: &MappingReport) -> String {
    let mut out = format!(
        "adapter {}: consumer {}, provider {}\n",
        spec.id, spec.consumer_side, spec.provider_side
    );
    for stage in &spec.chain {
        match stage {
            PatternInstance::MessageFilter(cfg) => {
                out.push_str(&format!("rule: messageFilter drop=[{}]\n", join(&cfg.drop)));
            }
            PatternInstance::Aggregator(cfg) => {
                out.push_str(&format!(
                    "rule: aggregator expected=[{}] target={}\n",
                    join(&cfg.expected),
                    cfg.target
                ));
                for merge in &cfg.merge_map {
                    for edge in &merge.path_map {
                        out.push_str(&corr_line(
                            mapping,
                            (&merge.source, &edge.from),
                            (&cfg.target, &edge.to),
                        ));
                    }
                }
            }
            PatternInstance::Splitter(cfg) => {
                let targets: Vec<QName> = cfg.parts.iter().map(|p| p.target.clone()).collect();
                out.push_str(&format!(
                    "rule: splitter source={} parts=[{}]\n",
                    cfg.source,
                    join(&targets)
                ));
                for part in &cfg.parts {
                    for edge in &part.path_map {
                        out.push_str(&corr_line(
                            mapping,
                            (&part.target, &edge.to),
                            (&cfg.source, &edge.from),
                        ));
                    }
                }
            }
            PatternInstance::Resequencer(cfg) => {
                out.push_str(&format!("rule: resequencer order=[{}]\n", join(&cfg.order)));
            }
        }
    }
    for rule in &spec.outbound {
        if rule.message != rule.deliver_as {
            out.push_str(&format!("rule: rebind {} -> {}\n", rule.message, rule.deliver_as));
            if let Some(m) = mapping
                .mapping_for(&rule.message, &rule.deliver_as)
                .or_else(|| mapping.mapping_for(&rule.deliver_as, &rule.message))
            {
                for pair in m.correspondences.pairs() {
                    out.push_str(&format!(
                        "corr: {}#{} -> {}#{} score={:.1}\n",
                        m.sub,
                        pair.source,
                        m.sup,
                        pair.target,
                        pair.score.as_f64()
                    ));
                }
            }
        }
    }
    out
}

fn join(qnames: &[QName]) -> String {
    qnames.iter().map(QName::to_string).collect::<Vec<_>>().join(", ")
}

/// One correspondence line, oriented the way the mapping was stored.
fn corr_line(
    report: &MappingReport,
    x: (&QName, &FieldPath),
    y: (&QName, &FieldPath),
) -> String {
    for (s, t) in [(x, y), (y, x)] {
        if let Some(m) = report.mapping_for(s.0, t.0) {
            if let Some(pair) = m
                .correspondences
                .pairs()
                .iter()
                .find(|p| &p.source == s.1 && &p.target == t.1)
            {
                return format!(
                    "corr: {}#{} -> {}#{} score={:.1}\n",
                    s.0,
                    s.1,
                    t.0,
                    t.1,
                    pair.score.as_f64()
                );
            }
        }
    }
    format!("corr: {}#{} -> {}#{}\n", x.0, x.1, y.0, y.1)
}
