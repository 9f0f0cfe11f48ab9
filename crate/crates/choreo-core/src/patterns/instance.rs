//! Pattern instance configurations — the data the synthesis stage emits
//! and the engine executes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::schema::{FieldPath, MessageSchema, QName, SchemaRegistry};

use super::PatternError;

/// One leaf copy: take the value at `from` in the stage's input message,
/// place it at `to` in the output message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEdge {
    pub from: FieldPath,
    pub to: FieldPath,
}

/// One output of a splitter: the message to build and the leaf copies that
/// fill it. The `to` paths must cover the target schema exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitPart {
    pub target: QName,
    pub path_map: Vec<PathEdge>,
}

/// Splits one source message into its parts, in part order, stamping each
/// with a 1-based sequence index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitterCfg {
    pub source: QName,
    pub parts: Vec<SplitPart>,
}

/// How one expected input message contributes to the aggregated output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MergeSource {
    pub source: QName,
    pub path_map: Vec<PathEdge>,
}

/// What identifies a correlation group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum CorrelationKey {
    /// Group by the correlation-id header (the default emitted by
    /// synthesis: one group per consumer session).
    Header,
    /// A single fixed group — every message correlates.
    Constant { value: String },
}

/// Buffers per correlation group until every expected message is present,
/// then emits the merged target message and clears the group. A duplicate
/// arriving before completion is a routing error (dead letter).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregatorCfg {
    pub expected: Vec<QName>,
    pub target: QName,
    pub merge_map: Vec<MergeSource>,
    pub correlation: CorrelationKey,
}

/// Releases buffered messages in `order`, strictly: a message is released
/// only when every earlier position of the current cycle has been
/// released. The cycle restarts after the last position, so repeated
/// rounds (choreography loops) flow through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResequencerCfg {
    pub order: Vec<QName>,
}

/// Drops every message whose qualified name is in the drop set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterCfg {
    pub drop: Vec<QName>,
}

/// One stage of an adapter chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PatternInstance {
    MessageFilter(FilterCfg),
    Aggregator(AggregatorCfg),
    Splitter(SplitterCfg),
    Resequencer(ResequencerCfg),
}

impl PatternInstance {
    /// Short stage label for dead letters and reports.
    pub fn label(&self) -> String {
        match self {
            PatternInstance::MessageFilter(_) => "messageFilter".to_string(),
            PatternInstance::Aggregator(cfg) => format!("aggregator[{}]", cfg.target),
            PatternInstance::Splitter(cfg) => format!("splitter[{}]", cfg.source),
            PatternInstance::Resequencer(_) => "resequencer".to_string(),
        }
    }

    /// Whether the stage acts on a message of this name (anything outside
    /// the domain passes through unchanged).
    pub fn in_domain(&self, qname: &QName) -> bool {
        match self {
            PatternInstance::MessageFilter(cfg) => cfg.drop.contains(qname),
            PatternInstance::Aggregator(cfg) => cfg.expected.contains(qname),
            PatternInstance::Splitter(cfg) => &cfg.source == qname,
            PatternInstance::Resequencer(cfg) => cfg.order.contains(qname),
        }
    }

    /// Validates the instance against the registered schemas and
    /// normalizes path maps to target-schema leaf order. Misconfiguration
    /// is reported here, at wiring time, before any message flows.
    pub fn validate(&mut self, registry: &SchemaRegistry) -> Result<(), PatternError> {
        match self {
            PatternInstance::MessageFilter(cfg) => {
                if cfg.drop.is_empty() {
                    return Err(invalid("messageFilter", "empty drop set".to_string()));
                }
                ensure_distinct("messageFilter", &cfg.drop)?;
                Ok(())
            }
            PatternInstance::Resequencer(cfg) => {
                if cfg.order.len() < 2 {
                    return Err(invalid(
                        "resequencer",
                        "order must list at least two messages".to_string(),
                    ));
                }
                ensure_distinct("resequencer", &cfg.order)?;
                Ok(())
            }
            PatternInstance::Splitter(cfg) => {
                if cfg.parts.is_empty() {
                    return Err(invalid("splitter", "no parts".to_string()));
                }
                let source = lookup(registry, &cfg.source, "splitter")?;
                let targets: Vec<QName> =
                    cfg.parts.iter().map(|p| p.target.clone()).collect();
                ensure_distinct("splitter", &targets)?;
                for part in &mut cfg.parts {
                    let target = lookup(registry, &part.target, "splitter")?;
                    validate_path_map("splitter", &mut part.path_map, source, target)?;
                }
                Ok(())
            }
            PatternInstance::Aggregator(cfg) => {
                if cfg.expected.len() < 2 {
                    return Err(invalid(
                        "aggregator",
                        "fewer than two expected messages".to_string(),
                    ));
                }
                ensure_distinct("aggregator", &cfg.expected)?;
                let target = lookup(registry, &cfg.target, "aggregator")?;
                let merge_sources: Vec<QName> =
                    cfg.merge_map.iter().map(|m| m.source.clone()).collect();
                ensure_distinct("aggregator", &merge_sources)?;
                let expected_set: BTreeSet<&QName> = cfg.expected.iter().collect();
                let merge_set: BTreeSet<&QName> = merge_sources.iter().collect();
                if expected_set != merge_set {
                    return Err(invalid(
                        "aggregator",
                        "merge map sources differ from the expected set".to_string(),
                    ));
                }
                // Jointly the merge maps must cover the target exactly.
                let mut covered: Vec<(FieldPath, FieldPath)> = Vec::new();
                for merge in &cfg.merge_map {
                    let source = lookup(registry, &merge.source, "aggregator")?;
                    for edge in &merge.path_map {
                        check_edge("aggregator", edge, source, target)?;
                        covered.push((edge.to.clone(), edge.from.clone()));
                    }
                }
                let mut seen = BTreeSet::new();
                for (to, _) in &covered {
                    if !seen.insert(to.clone()) {
                        return Err(invalid(
                            "aggregator",
                            format!("target leaf `{to}` is written twice"),
                        ));
                    }
                }
                let target_leaves: BTreeSet<FieldPath> =
                    target.leaves().into_iter().map(|l| l.path).collect();
                if seen != target_leaves {
                    return Err(invalid(
                        "aggregator",
                        format!(
                            "merge maps cover {{{}}}, target requires {{{}}}",
                            join(&seen),
                            join(&target_leaves)
                        ),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Validates every stage of a chain. Stage order inside the vector is the
/// execution order.
pub fn validate_chain(
    chain: &mut [PatternInstance],
    registry: &SchemaRegistry,
) -> Result<(), PatternError> {
    for stage in chain {
        stage.validate(registry)?;
    }
    Ok(())
}

fn invalid(pattern: &'static str, detail: String) -> PatternError {
    PatternError::InvalidConfig { pattern, detail }
}

fn lookup<'r>(
    registry: &'r SchemaRegistry,
    qname: &QName,
    pattern: &'static str,
) -> Result<&'r MessageSchema, PatternError> {
    registry
        .get(qname)
        .ok_or_else(|| invalid(pattern, format!("unknown message `{qname}`")))
}

fn ensure_distinct(pattern: &'static str, qnames: &[QName]) -> Result<(), PatternError> {
    let set: BTreeSet<&QName> = qnames.iter().collect();
    if set.len() != qnames.len() {
        return Err(invalid(pattern, "duplicate message names".to_string()));
    }
    Ok(())
}

fn check_edge(
    pattern: &'static str,
    edge: &PathEdge,
    source: &MessageSchema,
    target: &MessageSchema,
) -> Result<(), PatternError> {
    let from_kind = source.leaf_kind(&edge.from).ok_or_else(|| {
        invalid(
            pattern,
            format!("`{}` is not a leaf of `{}`", edge.from, source.qname()),
        )
    })?;
    let to_kind = target.leaf_kind(&edge.to).ok_or_else(|| {
        invalid(
            pattern,
            format!("`{}` is not a leaf of `{}`", edge.to, target.qname()),
        )
    })?;
    if from_kind != to_kind {
        return Err(invalid(
            pattern,
            format!(
                "edge {} -> {} joins kinds {from_kind} and {to_kind}",
                edge.from, edge.to
            ),
        ));
    }
    Ok(())
}

/// Checks a path map covers the target exactly and reorders it to the
/// target's leaf order so built payloads are canonical.
fn validate_path_map(
    pattern: &'static str,
    path_map: &mut [PathEdge],
    source: &MessageSchema,
    target: &MessageSchema,
) -> Result<(), PatternError> {
    for edge in path_map.iter() {
        check_edge(pattern, edge, source, target)?;
    }
    let mut seen = BTreeSet::new();
    for edge in path_map.iter() {
        if !seen.insert(edge.to.clone()) {
            return Err(invalid(
                pattern,
                format!("target leaf `{}` is written twice", edge.to),
            ));
        }
    }
    let target_leaves: Vec<FieldPath> = target.leaves().into_iter().map(|l| l.path).collect();
    let target_set: BTreeSet<FieldPath> = target_leaves.iter().cloned().collect();
    if seen != target_set {
        return Err(invalid(
            pattern,
            format!(
                "path map covers {{{}}}, target `{}` requires {{{}}}",
                join(&seen),
                target.qname(),
                join(&target_set)
            ),
        ));
    }
    path_map.sort_by_key(|edge| {
        target_leaves
            .iter()
            .position(|p| p == &edge.to)
            .unwrap_or(usize::MAX)
    });
    Ok(())
}

fn join(paths: &BTreeSet<FieldPath>) -> String {
    paths
        .iter()
        .map(FieldPath::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::testutil::*;

    fn edge(from: &str, to: &str) -> PathEdge {
        PathEdge {
            from: FieldPath::parse(from).unwrap(),
            to: FieldPath::parse(to).unwrap(),
        }
    }

    /// The cart-side splitter: CD request into item and amount parts.
    pub(crate) fn cart_splitter() -> PatternInstance {
        PatternInstance::Splitter(SplitterCfg {
            source: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            parts: vec![
                SplitPart {
                    target: qn("SmartCart.addItem.addItemRequest"),
                    path_map: vec![
                        edge("product.id", "item.itemCode"),
                        edge("product.description", "item.descr"),
                    ],
                },
                SplitPart {
                    target: qn("SmartCart.setAmount.setAmountRequest"),
                    path_map: vec![edge("quantity", "amount")],
                },
            ],
        })
    }

    /// The client-side aggregator: product message plus quantity message
    /// into the CD request.
    pub(crate) fn client_aggregator() -> PatternInstance {
        PatternInstance::Aggregator(AggregatorCfg {
            expected: vec![
                qn("Client.addProduct.addProductRequest"),
                qn("Client.setQuantity.setQuantityRequest"),
            ],
            target: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            merge_map: vec![
                MergeSource {
                    source: qn("Client.addProduct.addProductRequest"),
                    path_map: vec![
                        edge("product.id", "product.id"),
                        edge("product.description", "product.description"),
                    ],
                },
                MergeSource {
                    source: qn("Client.setQuantity.setQuantityRequest"),
                    path_map: vec![edge("quantity", "quantity")],
                },
            ],
            correlation: CorrelationKey::Header,
        })
    }

    #[test]
    fn valid_instances_pass() {
        let registry = instore_registry();
        for mut instance in [
            cart_splitter(),
            client_aggregator(),
            PatternInstance::Resequencer(ResequencerCfg {
                order: vec![
                    qn("SmartCart.setAmount.setAmountRequest"),
                    qn("SmartCart.addItem.addItemRequest"),
                ],
            }),
            PatternInstance::MessageFilter(FilterCfg {
                drop: vec![qn("Client.setPromotionCode.setPromotionCodeRequest")],
            }),
        ] {
            instance.validate(&registry).unwrap();
        }
    }

    #[test]
    fn validation_normalizes_path_map_order() {
        let registry = instore_registry();
        let mut splitter = PatternInstance::Splitter(SplitterCfg {
            source: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            parts: vec![SplitPart {
                target: qn("SmartCart.addItem.addItemRequest"),
                // Deliberately in reverse target order.
                path_map: vec![
                    edge("product.description", "item.descr"),
                    edge("product.id", "item.itemCode"),
                ],
            }],
        });
        splitter.validate(&registry).unwrap();
        let PatternInstance::Splitter(cfg) = &splitter else { unreachable!() };
        assert_eq!(cfg.parts[0].path_map[0].to.to_string(), "item.itemCode");
    }

    #[test]
    fn incomplete_coverage_is_a_config_error() {
        let registry = instore_registry();
        let mut splitter = PatternInstance::Splitter(SplitterCfg {
            source: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            parts: vec![SplitPart {
                target: qn("SmartCart.addItem.addItemRequest"),
                path_map: vec![edge("product.id", "item.itemCode")], // missing descr
            }],
        });
        let err = splitter.validate(&registry).unwrap_err();
        assert!(matches!(err, PatternError::InvalidConfig { pattern: "splitter", .. }));
    }

    #[test]
    fn kind_mismatched_edges_are_config_errors() {
        let registry = instore_registry();
        let mut splitter = PatternInstance::Splitter(SplitterCfg {
            source: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            parts: vec![SplitPart {
                target: qn("SmartCart.setAmount.setAmountRequest"),
                path_map: vec![edge("product.id", "amount")], // string -> int
            }],
        });
        assert!(splitter.validate(&registry).is_err());
    }

    #[test]
    fn aggregator_requires_exact_joint_coverage() {
        let registry = instore_registry();
        // Missing the quantity contribution.
        let mut agg = PatternInstance::Aggregator(AggregatorCfg {
            expected: vec![
                qn("Client.addProduct.addProductRequest"),
                qn("Client.setQuantity.setQuantityRequest"),
            ],
            target: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            merge_map: vec![
                MergeSource {
                    source: qn("Client.addProduct.addProductRequest"),
                    path_map: vec![
                        edge("product.id", "product.id"),
                        edge("product.description", "product.description"),
                    ],
                },
                MergeSource {
                    source: qn("Client.setQuantity.setQuantityRequest"),
                    path_map: vec![],
                },
            ],
            correlation: CorrelationKey::Header,
        });
        assert!(agg.validate(&registry).is_err());

        // Fewer than two expected messages.
        let mut single = PatternInstance::Aggregator(AggregatorCfg {
            expected: vec![qn("Client.addProduct.addProductRequest")],
            target: qn("CD_Client_SmartCart.addProduct.addProductRequest"),
            merge_map: vec![],
            correlation: CorrelationKey::Header,
        });
        assert!(single.validate(&registry).is_err());
    }

    #[test]
    fn serialization_round_trips_with_kind_tags() {
        let instance = cart_splitter();
        let json = serde_json::to_value(&instance).unwrap();
        assert_eq!(json["kind"], "splitter");
        let back: PatternInstance = serde_json::from_value(json).unwrap();
        assert_eq!(back, instance);

        let filter = PatternInstance::MessageFilter(FilterCfg {
            drop: vec![qn("Client.setPromotionCode.setPromotionCodeRequest")],
        });
        let json = serde_json::to_value(&filter).unwrap();
        assert_eq!(json["kind"], "messageFilter");
    }
}
