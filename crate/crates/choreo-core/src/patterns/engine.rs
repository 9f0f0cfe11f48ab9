//! The pipes-and-filters runtime: channels, per-stage state, the four
//! stage processors, and the chain executor that threads messages
//! through a configured adapter.
//!
//! Processing is deterministic: stages run in chain order, buffered
//! state lives in ordered maps, and a given input stream always yields
//! the same output stream. A stage failure (duplicate correlation,
//! malformed payload) consumes the offending message into a dead letter
//! and never aborts the chain.

use std::collections::{BTreeMap, VecDeque};

use crate::schema::{FieldPath, QName, SchemaRegistry};

use super::instance::{
    validate_chain, AggregatorCfg, CorrelationKey, FilterCfg, PatternInstance, ResequencerCfg,
    SplitterCfg,
};
use super::message::{Headers, RuntimeMessage, Value};
use super::PatternError;

/// A FIFO message queue connecting pipeline components. An unbounded
/// channel never rejects; a bounded one reports overflow to the caller.
#[derive(Debug, Clone)]
pub struct Channel {
    name: String,
    capacity: Option<usize>,
    queue: VecDeque<RuntimeMessage>,
}

impl Channel {
    pub fn unbounded(name: impl Into<String>) -> Self {
        Channel { name: name.into(), capacity: None, queue: VecDeque::new() }
    }

    pub fn bounded(name: impl Into<String>, capacity: usize) -> Self {
        Channel { name: name.into(), capacity: Some(capacity), queue: VecDeque::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn send(&mut self, message: RuntimeMessage) -> Result<(), PatternError> {
        if let Some(capacity) = self.capacity {
            if self.queue.len() >= capacity {
                return Err(PatternError::ChannelFull { name: self.name.clone(), capacity });
            }
        }
        self.queue.push_back(message);
        Ok(())
    }

    pub fn recv(&mut self) -> Option<RuntimeMessage> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// A message the chain could not route, with the stage that gave up on
/// it and why. Dead letters accumulate; they never abort processing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadLetter {
    pub message: RuntimeMessage,
    pub stage: String,
    pub reason: String,
}

/// Something observable a chain did besides forwarding: intentionally
/// dropping a message, or dead-lettering one it could not route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainEvent {
    Dropped { stage: String, message: RuntimeMessage },
    DeadLetter(DeadLetter),
}

/// Buffered messages of one resequencer correlation group, plus the
/// cursor into the release order. The cursor cycles, so a group can go
/// through the order repeatedly (loops in the coordination logic).
#[derive(Debug, Clone, Default)]
pub struct ResequencerSlot {
    pending: BTreeMap<QName, VecDeque<RuntimeMessage>>,
    next: usize,
}

impl ResequencerSlot {
    pub fn pending_count(&self) -> usize {
        self.pending.values().map(VecDeque::len).sum()
    }
}

/// Mutable state of one chain stage. Filters and splitters are
/// stateless; aggregators and resequencers buffer per correlation
/// group.
#[derive(Debug, Clone)]
pub enum PatternState {
    Stateless,
    Aggregator { groups: BTreeMap<String, BTreeMap<QName, RuntimeMessage>> },
    Resequencer { slots: BTreeMap<String, ResequencerSlot> },
}

impl PatternState {
    pub fn for_stage(stage: &PatternInstance) -> Self {
        match stage {
            PatternInstance::MessageFilter(_) | PatternInstance::Splitter(_) => {
                PatternState::Stateless
            }
            PatternInstance::Aggregator(_) => PatternState::Aggregator { groups: BTreeMap::new() },
            PatternInstance::Resequencer(_) => {
                PatternState::Resequencer { slots: BTreeMap::new() }
            }
        }
    }

    /// Number of messages currently held back by this stage.
    pub fn pending_count(&self) -> usize {
        match self {
            PatternState::Stateless => 0,
            PatternState::Aggregator { groups } => groups.values().map(BTreeMap::len).sum(),
            PatternState::Resequencer { slots } => {
                slots.values().map(ResequencerSlot::pending_count).sum()
            }
        }
    }
}

/// Returns `true` when the filter drops messages with this name.
pub fn filter_process(cfg: &FilterCfg, qname: &QName) -> bool {
    cfg.drop.contains(qname)
}

/// Splits a source message into its configured parts, in part order,
/// stamping each with a 1-based sequence index and inheriting the
/// source correlation id, sender, and timestamp.
pub fn splitter_process(
    cfg: &SplitterCfg,
    message: &RuntimeMessage,
) -> Result<Vec<RuntimeMessage>, PatternError> {
    let mut parts = Vec::with_capacity(cfg.parts.len());
    for (index, part) in cfg.parts.iter().enumerate() {
        let mut pairs = Vec::with_capacity(part.path_map.len());
        for edge in &part.path_map {
            let value = message.payload.at_path(&edge.from).ok_or_else(|| {
                PatternError::Payload {
                    qname: message.qname.to_string(),
                    detail: format!("missing leaf `{}`", edge.from),
                }
            })?;
            pairs.push((edge.to.clone(), value.clone()));
        }
        let payload = assemble(&message.qname, &pairs)?;
        parts.push(RuntimeMessage {
            qname: part.target.clone(),
            payload,
            headers: Headers {
                correlation_id: message.headers.correlation_id.clone(),
                sequence_index: Some(index as u32 + 1),
                sender: message.headers.sender.clone(),
                timestamp: message.headers.timestamp,
            },
        });
    }
    Ok(parts)
}

/// Buffers the message under its correlation group. When the group
/// holds every expected message the merged target is returned and the
/// group cleared; correlation id, sender, and timestamp come from the
/// completing arrival. A duplicate before completion is a routing
/// error — the caller dead-letters it.
pub fn aggregator_process(
    cfg: &AggregatorCfg,
    target_order: &[FieldPath],
    groups: &mut BTreeMap<String, BTreeMap<QName, RuntimeMessage>>,
    message: RuntimeMessage,
) -> Result<Option<RuntimeMessage>, PatternError> {
    let key = match &cfg.correlation {
        CorrelationKey::Header => message.headers.correlation_id.clone(),
        CorrelationKey::Constant { value } => value.clone(),
    };
    let group = groups.entry(key.clone()).or_default();
    if group.contains_key(&message.qname) {
        return Err(PatternError::Routing {
            stage: format!("aggregator[{}]", cfg.target),
            detail: format!(
                "duplicate `{}` in correlation group `{key}` before completion",
                message.qname
            ),
        });
    }
    let completing_headers = message.headers.clone();
    group.insert(message.qname.clone(), message);
    if !cfg.expected.iter().all(|qname| group.contains_key(qname)) {
        return Ok(None);
    }
    let group = groups.remove(&key).expect("group exists at completion");
    let mut pairs = Vec::new();
    for merge in &cfg.merge_map {
        let source = &group[&merge.source];
        for edge in &merge.path_map {
            let value = source.payload.at_path(&edge.from).ok_or_else(|| {
                PatternError::Payload {
                    qname: merge.source.to_string(),
                    detail: format!("missing leaf `{}`", edge.from),
                }
            })?;
            pairs.push((edge.to.clone(), value.clone()));
        }
    }
    // Assemble in the target schema's own leaf order so the merged
    // payload is canonical regardless of merge-map layout.
    pairs.sort_by_key(|(to, _)| {
        target_order.iter().position(|p| p == to).unwrap_or(usize::MAX)
    });
    let payload = assemble(&cfg.target, &pairs)?;
    Ok(Some(RuntimeMessage {
        qname: cfg.target.clone(),
        payload,
        headers: Headers {
            correlation_id: completing_headers.correlation_id,
            sequence_index: None,
            sender: completing_headers.sender,
            timestamp: completing_headers.timestamp,
        },
    }))
}

/// Buffers the message in its correlation group and releases the
/// longest prefix of the configured order that is now available. The
/// release cursor wraps, so repeated rounds flow through in order.
pub fn resequencer_process(
    cfg: &ResequencerCfg,
    slots: &mut BTreeMap<String, ResequencerSlot>,
    message: RuntimeMessage,
) -> Vec<RuntimeMessage> {
    let slot = slots.entry(message.headers.correlation_id.clone()).or_default();
    slot.pending.entry(message.qname.clone()).or_default().push_back(message);
    let mut released = Vec::new();
    loop {
        let wanted = &cfg.order[slot.next];
        match slot.pending.get_mut(wanted).and_then(VecDeque::pop_front) {
            Some(next) => {
                released.push(next);
                slot.next = (slot.next + 1) % cfg.order.len();
            }
            None => break,
        }
    }
    released
}

/// Builds a record payload from `(target path, value)` pairs given in
/// the target schema's leaf order. Exact-coverage validation at wiring
/// time guarantees the pairs reconstruct the target structure.
fn assemble(qname: &QName, pairs: &[(FieldPath, Value)]) -> Result<Value, PatternError> {
    let mut root: Vec<(String, Value)> = Vec::new();
    for (path, value) in pairs {
        insert_at(&mut root, path.segments(), value.clone()).map_err(|detail| {
            PatternError::Payload { qname: qname.to_string(), detail }
        })?;
    }
    Ok(Value::Record(root))
}

fn insert_at(
    fields: &mut Vec<(String, Value)>,
    segments: &[String],
    value: Value,
) -> Result<(), String> {
    let (head, rest) = segments.split_first().expect("paths are non-empty");
    if rest.is_empty() {
        if fields.iter().any(|(name, _)| name == head) {
            return Err(format!("field `{head}` assigned twice"));
        }
        fields.push((head.clone(), value));
        return Ok(());
    }
    if let Some((_, existing)) = fields.iter_mut().find(|(name, _)| name == head) {
        match existing {
            Value::Record(children) => insert_at(children, rest, value),
            _ => Err(format!("field `{head}` used both as leaf and record")),
        }
    } else {
        let mut children = Vec::new();
        insert_at(&mut children, rest, value)?;
        fields.push((head.clone(), Value::Record(children)));
        Ok(())
    }
}

/// Executes one adapter chain: stages in order, each with its own
/// state. Messages no stage acts on pass through unchanged.
#[derive(Debug, Clone)]
pub struct ChainExecutor {
    id: String,
    chain: Vec<PatternInstance>,
    states: Vec<PatternState>,
    target_orders: BTreeMap<QName, Vec<FieldPath>>,
    events: Vec<ChainEvent>,
}

impl ChainExecutor {
    /// Validates the chain against the registry (normalizing path maps)
    /// and prepares per-stage state.
    pub fn new(
        id: impl Into<String>,
        mut chain: Vec<PatternInstance>,
        registry: &SchemaRegistry,
    ) -> Result<Self, PatternError> {
        validate_chain(&mut chain, registry)?;
        let mut target_orders = BTreeMap::new();
        for stage in &chain {
            if let PatternInstance::Aggregator(cfg) = stage {
                let schema = registry
                    .get(&cfg.target)
                    .expect("aggregator target was validated against the registry");
                target_orders.insert(
                    cfg.target.clone(),
                    schema.leaves().into_iter().map(|leaf| leaf.path).collect(),
                );
            }
        }
        let states = chain.iter().map(PatternState::for_stage).collect();
        Ok(ChainExecutor { id: id.into(), chain, states, target_orders, events: Vec::new() })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chain(&self) -> &[PatternInstance] {
        &self.chain
    }

    /// Messages currently buffered across all stages.
    pub fn pending_count(&self) -> usize {
        self.states.iter().map(PatternState::pending_count).sum()
    }

    /// Drops and dead letters recorded since the last drain.
    pub fn drain_events(&mut self) -> Vec<ChainEvent> {
        std::mem::take(&mut self.events)
    }

    /// Threads one message through the chain and returns whatever
    /// comes out the far end. Never fails: unroutable messages become
    /// dead-letter events instead.
    pub fn accept(&mut self, message: RuntimeMessage) -> Vec<RuntimeMessage> {
        let ChainExecutor { chain, states, target_orders, events, .. } = self;
        let mut current = vec![message];
        for (stage, state) in chain.iter().zip(states.iter_mut()) {
            let mut next = Vec::new();
            for message in current {
                if !stage.in_domain(&message.qname) {
                    next.push(message);
                    continue;
                }
                match (stage, &mut *state) {
                    (PatternInstance::MessageFilter(cfg), _) => {
                        if filter_process(cfg, &message.qname) {
                            events.push(ChainEvent::Dropped { stage: stage.label(), message });
                        } else {
                            next.push(message);
                        }
                    }
                    (PatternInstance::Splitter(cfg), _) => {
                        match splitter_process(cfg, &message) {
                            Ok(parts) => next.extend(parts),
                            Err(err) => dead_letter(events, stage.label(), message, err),
                        }
                    }
                    (
                        PatternInstance::Aggregator(cfg),
                        PatternState::Aggregator { groups },
                    ) => {
                        let keep = message.clone();
                        let order = &target_orders[&cfg.target];
                        match aggregator_process(cfg, order, groups, message) {
                            Ok(Some(merged)) => next.push(merged),
                            Ok(None) => {}
                            Err(err) => dead_letter(events, stage.label(), keep, err),
                        }
                    }
                    (
                        PatternInstance::Resequencer(cfg),
                        PatternState::Resequencer { slots },
                    ) => {
                        next.extend(resequencer_process(cfg, slots, message));
                    }
                    _ => unreachable!("stage and state are built in lockstep"),
                }
            }
            current = next;
        }
        current
    }
}

fn dead_letter(
    events: &mut Vec<ChainEvent>,
    stage: String,
    message: RuntimeMessage,
    err: PatternError,
) {
    events.push(ChainEvent::DeadLetter(DeadLetter { message, stage, reason: err.to_string() }));
}

/// Drains `inbound` through the executor into `outbound` and returns
/// the events recorded along the way. Channel overflow is a wiring
/// problem and is reported as an error.
pub fn run_chain(
    executor: &mut ChainExecutor,
    inbound: &mut Channel,
    outbound: &mut Channel,
) -> Result<Vec<ChainEvent>, PatternError> {
    while let Some(message) = inbound.recv() {
        for output in executor.accept(message) {
            outbound.send(output)?;
        }
    }
    Ok(executor.drain_events())
}
