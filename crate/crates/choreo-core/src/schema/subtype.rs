//! Structural subtyping between message schemas.
//!
//! `t1 ⪯ t2` holds when every leaf of `t1` can be assigned to a distinct
//! leaf of `t2` with exactly the same primitive kind. Nesting is
//! deliberately ignored: a flat `quantity` leaf may feed a nested
//! `order.quantity` leaf and vice versa. Among all complete injective
//! assignments the one maximizing total name similarity wins; an exact tie
//! between distinct maxima marks the result ambiguous, and the winner is
//! then the assignment preferring earlier-declared target leaves (document
//! order), so results stay deterministic either way.
//!
//! Name similarity is scored in tenths (see [`name_similarity`]):
//! 10 for a case-insensitive exact match, 8 when the names match after
//! stripping non-alphanumerics and lowercasing, 6 when one normalized name
//! contains the other and the contained name has at least three characters
//! (`descr` / `description`), 2 otherwise. Integer scores make total-score
//! ties exact rather than a floating-point accident.

use super::{
    Correspondence, CorrespondenceSet, FieldPath, Leaf, MessageSchema, Score, SchemaError,
};

/// Externally supplied constraints on the leaf assignment, distilled from
/// user verdicts: `required` pins a source leaf to a target leaf,
/// `forbidden` removes a candidate pair from consideration.
#[derive(Debug, Clone, Default)]
pub struct MatchConstraints {
    pub required: Vec<(FieldPath, FieldPath)>,
    pub forbidden: Vec<(FieldPath, FieldPath)>,
}

impl MatchConstraints {
    pub fn is_empty(&self) -> bool {
        self.required.is_empty() && self.forbidden.is_empty()
    }
}

/// The outcome of a successful leaf-assignment search.
#[derive(Debug, Clone)]
pub struct LeafMatch {
    /// The winning assignment (document-order tie-break applied).
    pub correspondences: CorrespondenceSet,
    /// Total name-similarity score of the winner, in tenths.
    pub total_tenths: u32,
    /// True when a distinct assignment reaches the same total score.
    pub ambiguous: bool,
    /// All maximal assignments, winner first. Bounded by
    /// [`MAX_RECORDED_CANDIDATES`]; `ambiguous` is exact regardless.
    pub candidates: Vec<CorrespondenceSet>,
}

/// Cap on how many tied assignments are materialized for reporting. The
/// ambiguity *flag* still reflects every tie.
pub const MAX_RECORDED_CANDIDATES: usize = 8;

/// Checks `sub ⪯ sup` and returns the best complete injective leaf
/// assignment, or `None` when no complete assignment exists (some leaf of
/// `sub` has no kind-compatible, non-forbidden target left under
/// injectivity).
pub fn subtype_of(
    sub: &MessageSchema,
    sup: &MessageSchema,
    constraints: &MatchConstraints,
) -> Option<CorrespondenceSet> {
    match_leaves(sub, sup, constraints)
        .ok()
        .flatten()
        .map(|m| m.correspondences)
}

/// Structural equivalence: mutual subtyping with no constraints.
pub fn equiv(a: &MessageSchema, b: &MessageSchema) -> bool {
    let none = MatchConstraints::default();
    subtype_of(a, b, &none).is_some() && subtype_of(b, a, &none).is_some()
}

/// Name-similarity score in tenths. See the module doc for the ladder.
pub fn name_similarity(a: &str, b: &str) -> Score {
    if a.eq_ignore_ascii_case(b) {
        return Score::EXACT;
    }
    let na = normalize(a);
    let nb = normalize(b);
    if !na.is_empty() && na == nb {
        return Score::NORMALIZED;
    }
    let (shorter, longer) = if na.len() <= nb.len() { (&na, &nb) } else { (&nb, &na) };
    if shorter.len() >= 3 && longer.contains(shorter.as_str()) {
        return Score::AFFIX;
    }
    Score::FALLBACK
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

/// Full assignment search. Returns `Ok(None)` when `sub ⋠ sup`, and an
/// error when a required constraint is structurally impossible (unresolved
/// path, kind mismatch, two sources pinned to one target).
pub fn match_leaves(
    sub: &MessageSchema,
    sup: &MessageSchema,
    constraints: &MatchConstraints,
) -> Result<Option<LeafMatch>, SchemaError> {
    let sub_leaves = sub.leaves();
    let sup_leaves = sup.leaves();

    // Resolve constraints to leaf indexes up front.
    let mut required: Vec<Option<usize>> = vec![None; sub_leaves.len()];
    let mut pinned_targets = vec![false; sup_leaves.len()];
    for (source, target) in &constraints.required {
        let si = index_of(&sub_leaves, source).ok_or_else(|| SchemaError::PathUnresolved {
            path: source.to_string(),
            qname: sub.qname().to_string(),
        })?;
        let ti = index_of(&sup_leaves, target).ok_or_else(|| SchemaError::PathUnresolved {
            path: target.to_string(),
            qname: sup.qname().to_string(),
        })?;
        if sub_leaves[si].kind != sup_leaves[ti].kind {
            return Err(SchemaError::InvalidJson(format!(
                "required pair {source} -> {target} joins kinds {} and {}",
                sub_leaves[si].kind, sup_leaves[ti].kind
            )));
        }
        if let Some(prev) = required[si] {
            if prev != ti {
                return Err(SchemaError::InvalidJson(format!(
                    "source `{source}` is pinned to two different targets"
                )));
            }
        }
        if pinned_targets[ti] && required[si] != Some(ti) {
            return Err(SchemaError::InvalidJson(format!(
                "target `{target}` is pinned to two different sources"
            )));
        }
        required[si] = Some(ti);
        pinned_targets[ti] = true;
    }

    let forbidden: Vec<(usize, usize)> = constraints
        .forbidden
        .iter()
        .filter_map(|(s, t)| Some((index_of(&sub_leaves, s)?, index_of(&sup_leaves, t)?)))
        .collect();

    // Candidate targets per source, in target document order.
    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(sub_leaves.len());
    for (si, sl) in sub_leaves.iter().enumerate() {
        let row: Vec<usize> = match required[si] {
            Some(ti) => vec![ti],
            None => sup_leaves
                .iter()
                .enumerate()
                .filter(|(ti, tl)| {
                    tl.kind == sl.kind && !forbidden.contains(&(si, *ti))
                })
                .map(|(ti, _)| ti)
                .collect(),
        };
        if row.is_empty() {
            return Ok(None); // this leaf can never be placed
        }
        candidates.push(row);
    }

    let scores: Vec<Vec<u32>> = sub_leaves
        .iter()
        .map(|sl| {
            sup_leaves
                .iter()
                .map(|tl| u32::from(name_similarity(sl.path.leaf_name(), tl.path.leaf_name()).tenths()))
                .collect()
        })
        .collect();

    let mut search = Search {
        candidates: &candidates,
        scores: &scores,
        used: vec![false; sup_leaves.len()],
        assignment: Vec::with_capacity(sub_leaves.len()),
        best_total: None,
        best_assignments: Vec::new(),
        tie_count: 0,
    };
    search.explore(0, 0);

    let Some(best_total) = search.best_total else {
        return Ok(None);
    };
    let to_set = |assignment: &[usize]| -> Result<CorrespondenceSet, SchemaError> {
        let pairs = assignment
            .iter()
            .enumerate()
            .map(|(si, &ti)| Correspondence {
                source: sub_leaves[si].path.clone(),
                target: sup_leaves[ti].path.clone(),
                score: tenths_to_score(scores[si][ti]),
            })
            .collect();
        CorrespondenceSet::new(pairs, sub, sup)
    };
    let mut sets = Vec::with_capacity(search.best_assignments.len());
    for assignment in &search.best_assignments {
        sets.push(to_set(assignment)?);
    }
    Ok(Some(LeafMatch {
        correspondences: sets[0].clone(),
        total_tenths: best_total,
        ambiguous: search.tie_count > 1,
        candidates: sets,
    }))
}

fn tenths_to_score(tenths: u32) -> Score {
    match tenths {
        10 => Score::EXACT,
        8 => Score::NORMALIZED,
        6 => Score::AFFIX,
        _ => Score::FALLBACK,
    }
}

fn index_of(leaves: &[Leaf], path: &FieldPath) -> Option<usize> {
    leaves.iter().position(|l| &l.path == path)
}

/// Depth-first enumeration of complete injective assignments, in
/// lexicographic order of target choices. Keeping only strict improvements
/// means the retained best assignment is the lexicographically first among
/// the maxima — exactly the document-order tie-break.
struct Search<'a> {
    candidates: &'a [Vec<usize>],
    scores: &'a [Vec<u32>],
    used: Vec<bool>,
    assignment: Vec<usize>,
    best_total: Option<u32>,
    best_assignments: Vec<Vec<usize>>,
    tie_count: usize,
}

impl Search<'_> {
    fn explore(&mut self, source: usize, total: u32) {
        if source == self.candidates.len() {
            match self.best_total {
                Some(best) if total < best => {}
                Some(best) if total == best => {
                    self.tie_count += 1;
                    if self.best_assignments.len() < MAX_RECORDED_CANDIDATES {
                        self.best_assignments.push(self.assignment.clone());
                    }
                }
                _ => {
                    self.best_total = Some(total);
                    self.tie_count = 1;
                    self.best_assignments.clear();
                    self.best_assignments.push(self.assignment.clone());
                }
            }
            return;
        }
        for &target in &self.candidates[source] {
            if self.used[target] {
                continue;
            }
            self.used[target] = true;
            self.assignment.push(target);
            self.explore(source + 1, total + self.scores[source][target]);
            self.assignment.pop();
            self.used[target] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FieldDecl, PrimitiveKind, QName, TypeNode};

    fn schema(qname: &str, fields: Vec<FieldDecl>) -> MessageSchema {
        MessageSchema::new(QName::parse(qname).unwrap(), TypeNode::Record(fields)).unwrap()
    }

    fn leaf(name: &str, kind: PrimitiveKind) -> FieldDecl {
        FieldDecl {
            name: name.to_string(),
            node: TypeNode::Primitive(kind),
        }
    }

    fn record(name: &str, fields: Vec<FieldDecl>) -> FieldDecl {
        FieldDecl {
            name: name.to_string(),
            node: TypeNode::Record(fields),
        }
    }

    fn cd_add_product() -> MessageSchema {
        schema(
            "CD_Client_SmartCart.addProduct.addProductRequest",
            vec![
                record(
                    "product",
                    vec![
                        leaf("id", PrimitiveKind::String),
                        leaf("description", PrimitiveKind::String),
                    ],
                ),
                leaf("quantity", PrimitiveKind::Int),
            ],
        )
    }

    #[test]
    fn similarity_ladder() {
        assert_eq!(name_similarity("quantity", "Quantity"), Score::EXACT);
        assert_eq!(name_similarity("item_code", "itemCode"), Score::NORMALIZED);
        assert_eq!(name_similarity("descr", "description"), Score::AFFIX);
        assert_eq!(name_similarity("code", "promoCode"), Score::AFFIX);
        assert_eq!(name_similarity("amount", "quantity"), Score::FALLBACK);
        // A shared fragment below three characters stays at the fallback
        // score: `id` is a substring of `itemcode`-like names by accident
        // far too often.
        assert_eq!(name_similarity("id", "itemId"), Score::FALLBACK);
    }

    #[test]
    fn single_int_leaf_feeds_the_only_int_target() {
        let set_quantity = schema(
            "Client.setQuantity.setQuantityRequest",
            vec![leaf("quantity", PrimitiveKind::Int)],
        );
        let got = subtype_of(&set_quantity, &cd_add_product(), &MatchConstraints::default())
            .expect("subtype holds");
        assert_eq!(got.pairs().len(), 1);
        assert_eq!(got.pairs()[0].source.to_string(), "quantity");
        assert_eq!(got.pairs()[0].target.to_string(), "quantity");
        assert_eq!(got.pairs()[0].score, Score::EXACT);
    }

    #[test]
    fn fallback_scored_match_is_not_ambiguous_when_unique() {
        // setAmountRequest{amount:int} has exactly one int target leaf, so
        // despite the 0.2 score the assignment is forced and unambiguous.
        let set_amount = schema(
            "SmartCart.setAmount.setAmountRequest",
            vec![leaf("amount", PrimitiveKind::Int)],
        );
        let m = match_leaves(&set_amount, &cd_add_product(), &MatchConstraints::default())
            .unwrap()
            .expect("subtype holds");
        assert!(!m.ambiguous);
        assert_eq!(m.total_tenths, 2);
        assert_eq!(m.correspondences.pairs()[0].target.to_string(), "quantity");
    }

    #[test]
    fn nesting_does_not_constrain_assignment() {
        // Flat source feeds nested targets and vice versa.
        let flat = schema(
            "A.op.m",
            vec![leaf("id", PrimitiveKind::String), leaf("quantity", PrimitiveKind::Int)],
        );
        let nested = schema(
            "B.op.m",
            vec![record(
                "order",
                vec![leaf("id", PrimitiveKind::String), leaf("quantity", PrimitiveKind::Int)],
            )],
        );
        assert!(subtype_of(&flat, &nested, &MatchConstraints::default()).is_some());
        assert!(subtype_of(&nested, &flat, &MatchConstraints::default()).is_some());
    }

    #[test]
    fn absent_when_a_leaf_has_no_kind_compatible_target() {
        // Two string leaves cannot inject into a single string leaf.
        let two = schema(
            "A.op.m",
            vec![leaf("x", PrimitiveKind::String), leaf("y", PrimitiveKind::String)],
        );
        let one = schema("B.op.m", vec![leaf("a", PrimitiveKind::String)]);
        assert!(subtype_of(&two, &one, &MatchConstraints::default()).is_none());

        // Kind mismatch: int never feeds string.
        let int_leaf = schema("C.op.m", vec![leaf("n", PrimitiveKind::Int)]);
        assert!(subtype_of(&int_leaf, &one, &MatchConstraints::default()).is_none());
    }

    #[test]
    fn reflexive_and_equivalence_cases() {
        let cd = cd_add_product();
        let got = subtype_of(&cd, &cd, &MatchConstraints::default()).expect("reflexive");
        for pair in got.pairs() {
            assert_eq!(pair.source, pair.target);
            assert_eq!(pair.score, Score::EXACT);
        }

        // product{id, description} vs item{itemCode, descr}: equivalent —
        // two string leaves in bijection both ways.
        let client_add = schema(
            "Client.addProduct.addProductRequest",
            vec![record(
                "product",
                vec![
                    leaf("id", PrimitiveKind::String),
                    leaf("description", PrimitiveKind::String),
                ],
            )],
        );
        let add_item = schema(
            "SmartCart.addItem.addItemRequest",
            vec![record(
                "item",
                vec![
                    leaf("itemCode", PrimitiveKind::String),
                    leaf("descr", PrimitiveKind::String),
                ],
            )],
        );
        assert!(equiv(&client_add, &add_item));

        let set_quantity = schema(
            "Client.setQuantity.setQuantityRequest",
            vec![leaf("quantity", PrimitiveKind::Int)],
        );
        assert!(!equiv(&set_quantity, &client_add));
    }

    #[test]
    fn add_item_maps_into_cd_request_by_affinity() {
        // item.descr -> product.description carries the 0.6 affix score and
        // decides the assignment; item.itemCode takes the remaining string
        // leaf product.id. This is the renaming the downstream splitter
        // inverts.
        let add_item = schema(
            "SmartCart.addItem.addItemRequest",
            vec![record(
                "item",
                vec![
                    leaf("itemCode", PrimitiveKind::String),
                    leaf("descr", PrimitiveKind::String),
                ],
            )],
        );
        let m = match_leaves(&add_item, &cd_add_product(), &MatchConstraints::default())
            .unwrap()
            .expect("subtype holds");
        assert!(!m.ambiguous);
        assert_eq!(m.total_tenths, 8); // 2 (itemCode->id) + 6 (descr->description)
        let rendered: Vec<(String, String)> = m
            .correspondences
            .pairs()
            .iter()
            .map(|p| (p.source.to_string(), p.target.to_string()))
            .collect();
        assert_eq!(
            rendered,
            vec![
                ("item.itemCode".to_string(), "product.id".to_string()),
                ("item.descr".to_string(), "product.description".to_string()),
            ]
        );
    }

    #[test]
    fn exact_tie_is_flagged_and_broken_by_document_order() {
        // promotionCode scores 0.2 against both string leaves of the CD
        // request: a genuine tie.
        let promo = schema(
            "Client.setPromotionCode.setPromotionCodeRequest",
            vec![leaf("promotionCode", PrimitiveKind::String)],
        );
        let m = match_leaves(&promo, &cd_add_product(), &MatchConstraints::default())
            .unwrap()
            .expect("structural injection exists");
        assert!(m.ambiguous);
        assert_eq!(m.candidates.len(), 2);
        // Winner prefers the earlier-declared target leaf.
        assert_eq!(m.correspondences.pairs()[0].target.to_string(), "product.id");
        assert_eq!(
            m.candidates[1].pairs()[0].target.to_string(),
            "product.description"
        );
    }

    #[test]
    fn two_by_two_tie_enumerates_both_bijections() {
        let left = schema(
            "A.op.m",
            vec![leaf("a", PrimitiveKind::String), leaf("b", PrimitiveKind::String)],
        );
        let right = schema(
            "B.op.m",
            vec![leaf("x", PrimitiveKind::String), leaf("y", PrimitiveKind::String)],
        );
        let m = match_leaves(&left, &right, &MatchConstraints::default())
            .unwrap()
            .expect("subtype holds");
        assert!(m.ambiguous);
        assert_eq!(m.candidates.len(), 2);
        assert_eq!(m.total_tenths, 4);
        // Document-order winner: a->x, b->y.
        assert_eq!(m.correspondences.pairs()[0].target.to_string(), "x");
        assert_eq!(m.correspondences.pairs()[1].target.to_string(), "y");
    }

    #[test]
    fn forbidden_pairs_remove_candidates() {
        let promo = schema(
            "Client.setPromotionCode.setPromotionCodeRequest",
            vec![leaf("promotionCode", PrimitiveKind::String)],
        );
        let constraints = MatchConstraints {
            required: vec![],
            forbidden: vec![
                (
                    FieldPath::parse("promotionCode").unwrap(),
                    FieldPath::parse("product.id").unwrap(),
                ),
                (
                    FieldPath::parse("promotionCode").unwrap(),
                    FieldPath::parse("product.description").unwrap(),
                ),
            ],
        };
        assert!(subtype_of(&promo, &cd_add_product(), &constraints).is_none());
    }

    #[test]
    fn required_pair_resolves_a_tie() {
        let promo = schema(
            "Client.setPromotionCode.setPromotionCodeRequest",
            vec![leaf("promotionCode", PrimitiveKind::String)],
        );
        let constraints = MatchConstraints {
            required: vec![(
                FieldPath::parse("promotionCode").unwrap(),
                FieldPath::parse("product.description").unwrap(),
            )],
            forbidden: vec![],
        };
        let m = match_leaves(&promo, &cd_add_product(), &constraints)
            .unwrap()
            .expect("pinned assignment exists");
        assert!(!m.ambiguous);
        assert_eq!(
            m.correspondences.pairs()[0].target.to_string(),
            "product.description"
        );
    }

    #[test]
    fn impossible_required_pairs_are_errors() {
        let set_quantity = schema(
            "Client.setQuantity.setQuantityRequest",
            vec![leaf("quantity", PrimitiveKind::Int)],
        );
        // Kind mismatch: quantity (int) pinned onto product.id (string).
        let constraints = MatchConstraints {
            required: vec![(
                FieldPath::parse("quantity").unwrap(),
                FieldPath::parse("product.id").unwrap(),
            )],
            forbidden: vec![],
        };
        assert!(match_leaves(&set_quantity, &cd_add_product(), &constraints).is_err());
    }
}
