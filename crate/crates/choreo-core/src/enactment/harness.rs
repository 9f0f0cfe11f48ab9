//! Harness wiring and the deterministic event loop.
//!
//! [`build_harness`] assembles the components into the synthesized
//! architecture — every stub talks to its coordination delegate through
//! the attachment's adapter, or directly when the stub already speaks
//! the delegate's own interface — and validates the wiring: every role
//! bound exactly once, every scripted step performable, every sendable
//! message routed to exactly one first hop, every route naming a known
//! component.
//!
//! [`enact`] then runs a single-threaded work loop. Scripted sends are
//! injected only when the system is quiescent (run-to-completion per
//! stimulus), components are visited in declaration order, and queues
//! are FIFO, so the trace is fully determined by the inputs. Ticks are
//! logical: every trace event gets the next tick. The seed is recorded
//! in the trace header for provenance; with a single FIFO queue no
//! scheduling ties exist for it to break in v1.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::mapping::{Direction, InterfaceSpec};
use crate::patterns::{ChainEvent, ChainExecutor, Headers, RuntimeMessage, Value};
use crate::schema::{QName, SchemaRegistry};
use crate::synthesis::{
    cd_interface_toward, interacting_pairs, AdapterSpec, CdSpec, ChoreographySpec,
};

use super::stub::{ScriptStep, ServiceStub};
use super::trace::{Trace, TraceEvent, TraceKind, TraceMeta};
use super::EnactmentError;

/// One (stub, delegate) attachment. `adapter` is `None` when the stub
/// mirrors the delegate's face and is wired directly.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Attachment {
    role: String,
    stub: usize,
    cd: usize,
    adapter: Option<usize>,
}

/// First hop of a stub-sent message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Adapter(usize),
    Cd(usize),
}

/// The wired system: immutable during a run; all run state lives in the
/// event loop.
#[derive(Debug, Clone)]
pub struct Harness {
    choreo: ChoreographySpec,
    stubs: Vec<ServiceStub>,
    cds: Vec<CdSpec>,
    adapters: Vec<AdapterSpec>,
    registry: SchemaRegistry,
    seed: u64,
    scenario: String,
    bypass: bool,
    attachments: Vec<Attachment>,
    /// Attachment index per adapter (same length as `adapters`).
    adapter_attachment: Vec<usize>,
    /// Attachment index per (cd, role-the-forward-targets).
    cd_role_attachment: BTreeMap<(usize, String), usize>,
    /// First hop per (stub, sendable message).
    send_routes: BTreeMap<(usize, QName), Route>,
}

impl Harness {
    /// Scenario label recorded in the trace header.
    pub fn set_scenario(&mut self, name: impl Into<String>) {
        self.scenario = name.into();
    }

    /// Disable delegate enforcement for the next runs (experiments
    /// only: delegates forward everything and block nothing).
    pub fn set_bypass(&mut self, bypass: bool) {
        self.bypass = bypass;
    }

    pub fn adapters(&self) -> &[AdapterSpec] {
        &self.adapters
    }

    pub fn choreography(&self) -> &ChoreographySpec {
        &self.choreo
    }

    /// Roles wired to their delegate without an adapter.
    pub fn direct_roles(&self) -> Vec<&str> {
        self.attachments
            .iter()
            .filter(|a| a.adapter.is_none())
            .map(|a| a.role.as_str())
            .collect()
    }
}

/// Wires and validates the system. See the module docs for the checks.
pub fn build_harness(
    choreo: &ChoreographySpec,
    stubs: Vec<ServiceStub>,
    cds: Vec<CdSpec>,
    adapters: Vec<AdapterSpec>,
    registry: &SchemaRegistry,
    seed: u64,
) -> Result<Harness, EnactmentError> {
    choreo.validate()?;

    // Role bindings: every choreography role to exactly one stub.
    let mut stub_of_role: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, stub) in stubs.iter().enumerate() {
        if !choreo.roles.iter().any(|r| r == &stub.role) {
            return Err(EnactmentError::Wiring {
                detail: format!(
                    "stub `{}` is bound to `{}`, which is not a choreography role",
                    stub.interface.service, stub.role
                ),
            });
        }
        if stub_of_role.insert(stub.role.as_str(), idx).is_some() {
            return Err(EnactmentError::Wiring {
                detail: format!("role `{}` is bound to two stubs", stub.role),
            });
        }
    }
    for role in &choreo.roles {
        if !stub_of_role.contains_key(role.as_str()) {
            return Err(EnactmentError::UnboundRole { role: role.clone() });
        }
    }
    for stub in &stubs {
        stub.validate(registry)?;
    }

    // Delegates: exactly the choreography's interacting pairs.
    let mut cd_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, cd) in cds.iter().enumerate() {
        if cd_index.insert(cd.id.as_str(), idx).is_some() {
            return Err(EnactmentError::Wiring {
                detail: format!("delegate `{}` appears twice", cd.id),
            });
        }
    }
    let pairs = interacting_pairs(choreo);
    let mut expected: BTreeSet<String> = BTreeSet::new();
    for (a, b) in &pairs {
        let id = crate::synthesis::cd_id_for(a, b);
        if !cd_index.contains_key(id.as_str()) {
            return Err(EnactmentError::Wiring {
                detail: format!("no delegate for the `{a}`/`{b}` pair (expected `{id}`)"),
            });
        }
        expected.insert(id);
    }
    for cd in &cds {
        if !expected.contains(&cd.id) {
            return Err(EnactmentError::Wiring {
                detail: format!("delegate `{}` coordinates no role pair of the choreography", cd.id),
            });
        }
    }
    for adapter in &adapters {
        adapter.validate(registry)?;
    }

    // Attachments: each delegate side gets its adapter, or a direct
    // wire when the stub already mirrors the delegate's face.
    let mut attachments: Vec<Attachment> = Vec::new();
    let mut adapter_attachment: Vec<Option<usize>> = vec![None; adapters.len()];
    for (ci, cd) in cds.iter().enumerate() {
        for role in [&cd.roles.0, &cd.roles.1] {
            let si = stub_of_role[role.as_str()];
            let service = &stubs[si].interface.service;
            let matching: Vec<usize> = adapters
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    (a.consumer_side == *service && a.provider_side == cd.id)
                        || (a.consumer_side == cd.id && a.provider_side == *service)
                })
                .map(|(i, _)| i)
                .collect();
            let adapter = match matching.as_slice() {
                [] => {
                    if !mirrors_face(&stubs[si].interface, cd, role) {
                        return Err(EnactmentError::MissingAdapter {
                            service: service.clone(),
                            cd: cd.id.clone(),
                        });
                    }
                    None
                }
                [one] => Some(*one),
                many => {
                    return Err(EnactmentError::Wiring {
                        detail: format!(
                            "{} adapters connect `{service}` and `{}`",
                            many.len(),
                            cd.id
                        ),
                    })
                }
            };
            if let Some(ai) = adapter {
                if adapter_attachment[ai].is_some() {
                    return Err(EnactmentError::Wiring {
                        detail: format!("adapter `{}` matches two attachments", adapters[ai].id),
                    });
                }
                adapter_attachment[ai] = Some(attachments.len());
            }
            attachments.push(Attachment { role: role.clone(), stub: si, cd: ci, adapter });
        }
    }
    let adapter_attachment: Vec<usize> = adapter_attachment
        .into_iter()
        .enumerate()
        .map(|(ai, slot)| {
            slot.ok_or_else(|| EnactmentError::Wiring {
                detail: format!(
                    "adapter `{}` connects no bound service to a delegate",
                    adapters[ai].id
                ),
            })
        })
        .collect::<Result<_, _>>()?;

    // Routing tables, with dangling-route detection.
    let mut send_routes: BTreeMap<(usize, QName), Route> = BTreeMap::new();
    let mut cd_role_attachment: BTreeMap<(usize, String), usize> = BTreeMap::new();
    for (at_idx, at) in attachments.iter().enumerate() {
        cd_role_attachment.insert((at.cd, at.role.clone()), at_idx);
        let cd = &cds[at.cd];
        let service = &stubs[at.stub].interface.service;
        match at.adapter {
            Some(ai) => {
                let adapter = &adapters[ai];
                for rule in &adapter.inbound {
                    if rule.service == *service {
                        let key = (at.stub, rule.message.clone());
                        if send_routes.insert(key, Route::Adapter(ai)).is_some() {
                            return Err(EnactmentError::Wiring {
                                detail: format!(
                                    "message `{}` of `{service}` routes to two adapters",
                                    rule.message
                                ),
                            });
                        }
                    } else if rule.service != cd.id {
                        return Err(EnactmentError::Wiring {
                            detail: format!(
                                "adapter `{}` accepts `{}` from `{}`, which is neither side \
                                 of its attachment",
                                adapter.id, rule.message, rule.service
                            ),
                        });
                    }
                }
                for rule in &adapter.outbound {
                    if rule.service != *service && rule.service != cd.id {
                        return Err(EnactmentError::Wiring {
                            detail: format!(
                                "adapter `{}` delivers `{}` to `{}`, which is neither side \
                                 of its attachment",
                                adapter.id, rule.deliver_as, rule.service
                            ),
                        });
                    }
                }
            }
            None => {
                // Direct wire: the stub sends the delegate's own
                // messages for every forward it initiates.
                for forward in &cd.forwards {
                    if forward.from_role == at.role {
                        send_routes.insert((at.stub, forward.message.clone()), Route::Cd(at.cd));
                    }
                }
            }
        }
    }

    // Reachability: everything a stub can invoke must have a first hop.
    for (si, stub) in stubs.iter().enumerate() {
        for op in &stub.interface.operations {
            if op.direction == Direction::Required
                && !send_routes.contains_key(&(si, op.input.clone()))
            {
                return Err(EnactmentError::Wiring {
                    detail: format!(
                        "operation `{}` of `{}` reaches no delegate",
                        op.name, stub.interface.service
                    ),
                });
            }
        }
    }

    Ok(Harness {
        choreo: choreo.clone(),
        stubs,
        cds,
        adapters,
        registry: registry.clone(),
        seed,
        scenario: "scenario".to_string(),
        bypass: false,
        attachments,
        adapter_attachment,
        cd_role_attachment,
        send_routes,
    })
}

/// True when the interface is exactly the flipped image of the delegate's
/// face toward `role` — same operations, same messages, directions
/// mirrored. Such a service speaks the delegate's language and needs no
/// adapter; synthesis skips it and the harness wires it directly.
pub(crate) fn mirrors_face(interface: &InterfaceSpec, cd: &CdSpec, role: &str) -> bool {
    let face = match cd_interface_toward(cd, role) {
        Ok(face) => face,
        // A face with no operations toward this role cannot be built;
        // that also means nothing to mirror.
        Err(_) => return false,
    };
    let flipped = |d: Direction| match d {
        Direction::Provided => Direction::Required,
        Direction::Required => Direction::Provided,
    };
    face.operations.iter().all(|face_op| {
        interface.operation(&face_op.name).is_some_and(|op| {
            op.input == face_op.input && op.direction == flipped(face_op.direction)
        })
    })
}

/// Where a message sits between processing steps.
#[derive(Debug)]
enum Dest {
    Adapter(usize),
    Cd(usize),
    Stub(usize),
}

#[derive(Debug)]
struct Packet {
    dest: Dest,
    from: String,
    /// Provider operation, set when the destination is a stub.
    operation: Option<String>,
    msg: RuntimeMessage,
}

/// All mutable state of one run; the harness itself stays immutable so
/// runs can be repeated (and compared) freely.
struct RunState {
    executors: Vec<ChainExecutor>,
    cd_states: Vec<BTreeMap<String, String>>,
    cursors: Vec<usize>,
    tokens: Vec<String>,
    queue: VecDeque<Packet>,
    events: Vec<TraceEvent>,
    tick: u64,
}

impl RunState {
    fn new(harness: &Harness) -> Result<RunState, EnactmentError> {
        let executors = harness
            .adapters
            .iter()
            .map(|a| ChainExecutor::new(a.id.clone(), a.chain.clone(), &harness.registry))
            .collect::<Result<_, _>>()?;
        // One session per scripted stub, numbered in declaration order.
        let mut next = 0;
        let tokens = harness
            .stubs
            .iter()
            .map(|s| {
                if s.script.is_empty() {
                    String::new()
                } else {
                    next += 1;
                    format!("s{next}")
                }
            })
            .collect();
        Ok(RunState {
            executors,
            cd_states: vec![BTreeMap::new(); harness.cds.len()],
            cursors: vec![0; harness.stubs.len()],
            tokens,
            queue: VecDeque::new(),
            events: Vec::new(),
            tick: 1,
        })
    }

    fn push_event(
        &mut self,
        kind: TraceKind,
        from: &str,
        to: Option<&str>,
        operation: Option<&str>,
        msg: &RuntimeMessage,
        detail: Option<String>,
    ) {
        self.events.push(TraceEvent {
            tick: self.tick,
            kind,
            from: from.to_string(),
            to: to.map(str::to_string),
            operation: operation.map(str::to_string),
            qname: msg.qname.clone(),
            session: msg.headers.correlation_id.clone(),
            digest: msg.payload_digest(),
            detail,
        });
        self.tick += 1;
    }

    fn work_remains(&self, harness: &Harness) -> bool {
        !self.queue.is_empty()
            || self
                .cursors
                .iter()
                .zip(&harness.stubs)
                .any(|(cursor, stub)| *cursor < stub.script.len())
    }
}

/// Runs the system until every script is exhausted and every queue is
/// empty, or until the tick budget runs out (then the trace is flagged
/// incomplete rather than failing).
pub fn enact(harness: &Harness, max_ticks: u64) -> Result<Trace, EnactmentError> {
    let mut run = RunState::new(harness)?;
    let mut incomplete = false;
    loop {
        if run.tick > max_ticks {
            incomplete = run.work_remains(harness);
            break;
        }
        if let Some(packet) = run.queue.pop_front() {
            process(harness, &mut run, packet)?;
            continue;
        }
        // Quiescent: inject the next scripted send, stubs in order.
        let next = harness.stubs.iter().enumerate().find_map(|(si, stub)| {
            (run.cursors[si] < stub.script.len()).then(|| (si, stub.script[run.cursors[si]].clone()))
        });
        match next {
            Some((si, step)) => {
                run.cursors[si] += 1;
                let token = run.tokens[si].clone();
                send_from_stub(harness, &mut run, si, &step, token)?;
            }
            None => break,
        }
    }
    Ok(Trace {
        meta: TraceMeta {
            scenario: harness.scenario.clone(),
            seed: harness.seed,
            enforcement: !harness.bypass,
            incomplete,
        },
        events: run.events,
    })
}

/// A stub invokes one operation: trace the send and queue the message
/// at its first hop.
fn send_from_stub(
    harness: &Harness,
    run: &mut RunState,
    si: usize,
    step: &ScriptStep,
    session: String,
) -> Result<(), EnactmentError> {
    let stub = &harness.stubs[si];
    let op = stub
        .interface
        .operation(&step.operation)
        .expect("scripts were validated against the interface");
    let schema = harness.registry.require(&op.input)?;
    let payload = Value::from_json(schema, &step.payload)?;
    let route = send_routes_lookup(harness, si, &op.input)?;
    let (dest, to) = match route {
        Route::Adapter(ai) => (Dest::Adapter(ai), harness.adapters[ai].id.clone()),
        Route::Cd(ci) => (Dest::Cd(ci), harness.cds[ci].id.clone()),
    };
    let msg = RuntimeMessage {
        qname: op.input.clone(),
        payload,
        headers: Headers {
            correlation_id: session,
            sequence_index: None,
            sender: stub.interface.service.clone(),
            timestamp: run.tick,
        },
    };
    run.push_event(
        TraceKind::Sent,
        &stub.interface.service,
        Some(&to),
        Some(&op.name),
        &msg,
        None,
    );
    run.queue.push_back(Packet { dest, from: stub.interface.service.clone(), operation: None, msg });
    Ok(())
}

fn send_routes_lookup(harness: &Harness, si: usize, qname: &QName) -> Result<Route, EnactmentError> {
    harness
        .send_routes
        .get(&(si, qname.clone()))
        .copied()
        .ok_or_else(|| EnactmentError::Wiring {
            detail: format!("message `{qname}` has no route (wiring changed after build?)"),
        })
}

fn process(harness: &Harness, run: &mut RunState, packet: Packet) -> Result<(), EnactmentError> {
    match packet.dest {
        Dest::Adapter(ai) => process_adapter(harness, run, ai, packet.msg),
        Dest::Cd(ci) => process_cd(harness, run, ci, packet.msg),
        Dest::Stub(si) => process_stub(harness, run, si, packet),
    }
}

/// Thread the message through the adapter's chain, record drop and
/// dead-letter events, and route every chain output onward.
fn process_adapter(
    harness: &Harness,
    run: &mut RunState,
    ai: usize,
    msg: RuntimeMessage,
) -> Result<(), EnactmentError> {
    let adapter = &harness.adapters[ai];
    let outputs = run.executors[ai].accept(msg);
    for event in run.executors[ai].drain_events() {
        match event {
            ChainEvent::Dropped { stage, message } => {
                run.push_event(TraceKind::Dropped, &adapter.id, None, None, &message, Some(stage));
            }
            ChainEvent::DeadLetter(dead) => run.push_event(
                TraceKind::DeadLetter,
                &adapter.id,
                None,
                None,
                &dead.message,
                Some(format!("{}: {}", dead.stage, dead.reason)),
            ),
        }
    }
    let attachment = &harness.attachments[harness.adapter_attachment[ai]];
    let stub_service = &harness.stubs[attachment.stub].interface.service;
    let cd_id = &harness.cds[attachment.cd].id;
    for output in outputs {
        let Some(rule) = adapter.route_for(&output.qname) else {
            // Selection guarantees a route for everything a chain can
            // produce; keep the loop total anyway.
            run.push_event(
                TraceKind::DeadLetter,
                &adapter.id,
                None,
                None,
                &output,
                Some("no outbound route".to_string()),
            );
            continue;
        };
        let mut delivered = output;
        delivered.qname = rule.deliver_as.clone();
        if rule.service == *cd_id {
            run.queue.push_back(Packet {
                dest: Dest::Cd(attachment.cd),
                from: adapter.id.clone(),
                operation: None,
                msg: delivered,
            });
        } else if rule.service == *stub_service {
            run.queue.push_back(Packet {
                dest: Dest::Stub(attachment.stub),
                from: adapter.id.clone(),
                operation: Some(rule.operation.clone()),
                msg: delivered,
            });
        } else {
            run.push_event(
                TraceKind::DeadLetter,
                &adapter.id,
                None,
                None,
                &delivered,
                Some(format!("route names unknown component `{}`", rule.service)),
            );
        }
    }
    Ok(())
}

/// Consult the enforcement automaton for this session and either
/// forward toward the opposite side or block.
fn process_cd(
    harness: &Harness,
    run: &mut RunState,
    ci: usize,
    msg: RuntimeMessage,
) -> Result<(), EnactmentError> {
    let cd = &harness.cds[ci];
    let Some(forward) = cd.forward_for(&msg.qname) else {
        run.push_event(
            TraceKind::DeadLetter,
            &cd.id,
            None,
            None,
            &msg,
            Some("no forward rule for this message".to_string()),
        );
        return Ok(());
    };
    let token = msg.headers.correlation_id.clone();
    let state = run.cd_states[ci]
        .entry(token.clone())
        .or_insert_with(|| cd.initial.clone())
        .clone();
    let enabled = cd.enabled(&state, &msg.qname).map(|t| t.to.clone());
    let enforce = cd.enforcement && !harness.bypass;
    if let Some(next_state) = &enabled {
        run.cd_states[ci].insert(token, next_state.clone());
    }
    if enabled.is_none() && enforce {
        run.push_event(
            TraceKind::Blocked,
            &cd.id,
            None,
            Some(&forward.operation),
            &msg,
            Some(format!("not enabled in state {state}")),
        );
        return Ok(());
    }
    let at_idx = harness.cd_role_attachment[&(ci, forward.to_role.clone())];
    let attachment = &harness.attachments[at_idx];
    let (dest, to, operation) = match attachment.adapter {
        Some(ai) => (Dest::Adapter(ai), harness.adapters[ai].id.clone(), None),
        None => (
            Dest::Stub(attachment.stub),
            harness.stubs[attachment.stub].interface.service.clone(),
            Some(forward.operation.clone()),
        ),
    };
    run.push_event(
        TraceKind::Forwarded,
        &cd.id,
        Some(&to),
        Some(&forward.operation),
        &msg,
        None,
    );
    run.queue.push_back(Packet { dest, from: cd.id.clone(), operation, msg });
    Ok(())
}

/// Deliver to the stub and fire any reactive sends, which inherit the
/// trigger's session.
fn process_stub(
    harness: &Harness,
    run: &mut RunState,
    si: usize,
    packet: Packet,
) -> Result<(), EnactmentError> {
    let stub = &harness.stubs[si];
    let operation = packet.operation.as_deref().unwrap_or_default();
    run.push_event(
        TraceKind::Delivered,
        &packet.from,
        Some(&stub.interface.service),
        packet.operation.as_deref(),
        &packet.msg,
        None,
    );
    let reactive: Vec<ScriptStep> = stub
        .reactions
        .iter()
        .filter(|r| r.on == operation)
        .flat_map(|r| r.send.iter().cloned())
        .collect();
    for step in reactive {
        send_from_stub(harness, run, si, &step, packet.msg.headers.correlation_id.clone())?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::stub::tests::{golden_client_stub, silent_cart_stub, step};
    use super::*;
    use crate::canon;
    use crate::mapping::{infer_mappings, HintSet, InterfaceSpec, Mep, OperationSpec};
    use crate::synthesis::{
        cd_protocol_toward, select_patterns, synthesize_cd, AttachmentSide, Polarity, ProtocolSpec,
    };
    use crate::testutil::*;

    /// The complete in-store system: two stubs, one delegate, two
    /// synthesized adapters.
    pub fn golden_harness() -> Harness {
        let registry = instore_registry();
        let choreo = instore_choreography();
        let cd = synthesize_cd(&choreo, "Client", "SmartCart").unwrap();

        let cd_toward_client = cd_interface_toward(&cd, "Client").unwrap();
        let report_client = infer_mappings(
            &client_interface(),
            &cd_toward_client,
            &promo_reject_hints(),
            &registry,
        )
        .unwrap();
        let adapter1 = select_patterns(
            "Adapter1",
            &report_client,
            AttachmentSide { interface: &client_interface(), protocol: &client_protocol() },
            AttachmentSide {
                interface: &cd_toward_client,
                protocol: &cd_protocol_toward(&cd, "Client"),
            },
            &registry,
        )
        .unwrap();

        let cd_toward_cart = cd_interface_toward(&cd, "SmartCart").unwrap();
        let report_cart =
            infer_mappings(&smartcart_interface(), &cd_toward_cart, &HintSet::empty(), &registry)
                .unwrap();
        let adapter2 = select_patterns(
            "Adapter2",
            &report_cart,
            AttachmentSide { interface: &smartcart_interface(), protocol: &smartcart_protocol() },
            AttachmentSide {
                interface: &cd_toward_cart,
                protocol: &cd_protocol_toward(&cd, "SmartCart"),
            },
            &registry,
        )
        .unwrap();

        let mut harness = build_harness(
            &choreo,
            vec![golden_client_stub(), silent_cart_stub()],
            vec![cd],
            vec![adapter1, adapter2],
            &registry,
            42,
        )
        .unwrap();
        harness.set_scenario("golden");
        harness
    }

    #[test]
    fn golden_harness_wires_two_adapters() {
        let harness = golden_harness();
        assert_eq!(harness.adapters().len(), 2);
        assert!(harness.direct_roles().is_empty());
    }

    #[test]
    fn golden_run_delivers_amount_then_item_and_drops_the_promotion() {
        let harness = golden_harness();
        let trace = enact(&harness, 10_000).unwrap();
        trace.validate().unwrap();
        assert!(!trace.meta.incomplete);

        let kinds: Vec<TraceKind> = trace.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TraceKind::Sent,      // addProduct
                TraceKind::Sent,      // setQuantity completes the aggregate
                TraceKind::Forwarded, // delegate lets addProduct pass
                TraceKind::Delivered, // setAmount
                TraceKind::Delivered, // addItem
                TraceKind::Sent,      // setPromotionCode
                TraceKind::Dropped,   // ... which the filter discards
            ]
        );

        let delivered: Vec<&TraceEvent> = trace.events_of(TraceKind::Delivered).collect();
        assert_eq!(delivered[0].operation.as_deref(), Some("setAmount"));
        assert_eq!(delivered[0].digest, canon::digest(&serde_json::json!({"amount": 3})));
        assert_eq!(delivered[1].operation.as_deref(), Some("addItem"));
        assert_eq!(
            delivered[1].digest,
            canon::digest(&serde_json::json!({"item": {"itemCode": "p1", "descr": "milk"}}))
        );
        assert!(delivered.iter().all(|e| e.to.as_deref() == Some("SmartCart")));

        let dropped: Vec<&TraceEvent> = trace.events_of(TraceKind::Dropped).collect();
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].qname, qn("Client.setPromotionCode.setPromotionCodeRequest"));

        // One session throughout.
        assert!(trace.events.iter().all(|e| e.session == "s1"));
    }

    #[test]
    fn runs_are_deterministic() {
        let harness = golden_harness();
        let first = enact(&harness, 10_000).unwrap();
        let second = enact(&harness, 10_000).unwrap();
        assert_eq!(first.to_jsonl(), second.to_jsonl());
    }

    #[test]
    fn empty_scripts_produce_an_empty_trace() {
        let mut harness = golden_harness();
        harness.stubs[0].script.clear();
        let trace = enact(&harness, 100).unwrap();
        assert!(trace.events.is_empty());
        assert!(!trace.meta.incomplete);
    }

    #[test]
    fn exhausted_tick_budget_flags_the_trace_incomplete() {
        let harness = golden_harness();
        let trace = enact(&harness, 1).unwrap();
        assert!(trace.meta.incomplete);
        assert!(trace.events.len() <= 2);
    }

    #[test]
    fn unbound_roles_and_missing_adapters_are_wiring_errors() {
        let harness = golden_harness();
        let registry = instore_registry();
        let choreo = instore_choreography();

        let err = build_harness(
            &choreo,
            vec![golden_client_stub()],
            harness.cds.clone(),
            harness.adapters.clone(),
            &registry,
            42,
        )
        .unwrap_err();
        assert!(matches!(err, EnactmentError::UnboundRole { ref role } if role == "SmartCart"));

        let err = build_harness(
            &choreo,
            vec![golden_client_stub(), silent_cart_stub()],
            harness.cds.clone(),
            vec![harness.adapters[0].clone()],
            &registry,
            42,
        )
        .unwrap_err();
        assert!(
            matches!(err, EnactmentError::MissingAdapter { ref service, .. } if service == "SmartCart"),
            "{err}"
        );
    }

    /// A stub that speaks the delegate's own interface is wired
    /// directly — no adapter, same outcome. (Its service name is the
    /// delegate id, because message names are service-qualified.)
    #[test]
    fn mirrored_stub_is_wired_directly() {
        let golden = golden_harness();
        let registry = instore_registry();
        let choreo = instore_choreography();
        let cd = golden.cds[0].clone();

        let face = cd_interface_toward(&cd, "Client").unwrap();
        let mirrored = InterfaceSpec::new(
            &cd.id,
            face.operations
                .iter()
                .map(|op| OperationSpec {
                    name: op.name.clone(),
                    direction: Direction::Required,
                    mep: Mep::OneWay,
                    input: op.input.clone(),
                    output: None,
                })
                .collect(),
        )
        .unwrap();
        let mirrored_protocol = {
            let toward = cd_protocol_toward(&cd, "Client");
            ProtocolSpec {
                name: cd.id.clone(),
                transitions: toward
                    .transitions
                    .iter()
                    .cloned()
                    .map(|mut t| {
                        t.polarity = Polarity::Send;
                        t
                    })
                    .collect(),
                ..toward
            }
        };
        let mut direct_client = ServiceStub::new("Client", mirrored, mirrored_protocol);
        direct_client.script = vec![step(
            "addProduct",
            serde_json::json!({
                "product": {"id": "p9", "description": "tea"},
                "quantity": 2
            }),
        )];

        let harness = build_harness(
            &choreo,
            vec![direct_client, silent_cart_stub()],
            vec![cd],
            vec![golden.adapters[1].clone()],
            &registry,
            42,
        )
        .unwrap();
        assert_eq!(harness.direct_roles(), vec!["Client"]);
        assert_eq!(harness.adapters().len(), 1);

        let trace = enact(&harness, 1_000).unwrap();
        let delivered: Vec<&TraceEvent> = trace.events_of(TraceKind::Delivered).collect();
        assert_eq!(delivered.len(), 2);
        assert_eq!(delivered[0].operation.as_deref(), Some("setAmount"));
        assert_eq!(delivered[0].digest, canon::digest(&serde_json::json!({"amount": 2})));
        assert_eq!(delivered[1].operation.as_deref(), Some("addItem"));
    }

    /// A request/acknowledge exchange between two structurally equal
    /// services: both adapters are pure rebinds (empty chains), the
    /// responder acts purely through a reactive rule, and the reactive
    /// send must inherit the initiator's session token. The initiator's
    /// own protocol is deliberately liberal (it may start over after the
    /// exchange), so scripts the *choreography* forbids can still be
    /// expressed — that is what delegates are for.
    pub fn ping_pong_harness() -> Harness {
        ping_pong_harness_scripted(1)
    }

    pub fn ping_pong_harness_scripted(pings: usize) -> Harness {
        use crate::schema::PrimitiveKind;
        use crate::synthesis::{ChoreoNode, Edge, NodeKind, TaskNode, Transition};

        let mut registry = SchemaRegistry::new();
        for qname in [
            "Ping.ping.pingRequest",
            "Ping.pong.pongRequest",
            "Pong.ping.pingRequest",
            "Pong.pong.pongRequest",
            "CD_Ping_Pong.ping.pingRequest",
            "CD_Ping_Pong.pong.pongRequest",
        ] {
            registry.insert(schema(qname, vec![leaf("n", PrimitiveKind::Int)])).unwrap();
        }

        let iface = |service: &str, sends: &str, receives: &str| {
            InterfaceSpec::new(
                service,
                vec![
                    OperationSpec {
                        name: sends.to_string(),
                        direction: Direction::Required,
                        mep: Mep::OneWay,
                        input: qn(&format!("{service}.{sends}.{sends}Request")),
                        output: None,
                    },
                    OperationSpec {
                        name: receives.to_string(),
                        direction: Direction::Provided,
                        mep: Mep::OneWay,
                        input: qn(&format!("{service}.{receives}.{receives}Request")),
                        output: None,
                    },
                ],
            )
            .unwrap()
        };
        let proto = |service: &str, first: (&str, Polarity), second: (&str, Polarity)| ProtocolSpec {
            name: service.to_string(),
            states: vec!["x0".into(), "x1".into(), "x2".into()],
            initial: "x0".to_string(),
            finals: vec!["x2".into()],
            transitions: vec![
                Transition {
                    from: "x0".into(),
                    operation: first.0.to_string(),
                    polarity: first.1,
                    message: qn(&format!("{service}.{}.{}Request", first.0, first.0)),
                    to: "x1".into(),
                },
                Transition {
                    from: "x1".into(),
                    operation: second.0.to_string(),
                    polarity: second.1,
                    message: qn(&format!("{service}.{}.{}Request", second.0, second.0)),
                    to: "x2".into(),
                },
            ],
        };

        let task = |id: &str, initiator: &str, recipient: &str, op: &str| ChoreoNode {
            id: id.to_string(),
            kind: NodeKind::Task(TaskNode {
                initiator: initiator.to_string(),
                recipient: recipient.to_string(),
                operation: op.to_string(),
                message: qn(&format!("CD_Ping_Pong.{op}.{op}Request")),
            }),
        };
        let choreo = ChoreographySpec {
            name: "ping-pong".to_string(),
            roles: vec!["Ping".to_string(), "Pong".to_string()],
            nodes: vec![
                ChoreoNode { id: "start".into(), kind: NodeKind::Start },
                task("t_ping", "Ping", "Pong", "ping"),
                task("t_pong", "Pong", "Ping", "pong"),
                ChoreoNode { id: "end".into(), kind: NodeKind::End },
            ],
            edges: vec![
                Edge { from: "start".into(), to: "t_ping".into() },
                Edge { from: "t_ping".into(), to: "t_pong".into() },
                Edge { from: "t_pong".into(), to: "end".into() },
            ],
        };
        let cd = synthesize_cd(&choreo, "Ping", "Pong").unwrap();

        let build_adapter = |id: &str, service: &InterfaceSpec, protocol: &ProtocolSpec, role: &str| {
            let face = cd_interface_toward(&cd, role).unwrap();
            let report = infer_mappings(service, &face, &HintSet::empty(), &registry).unwrap();
            select_patterns(
                id,
                &report,
                AttachmentSide { interface: service, protocol },
                AttachmentSide { interface: &face, protocol: &cd_protocol_toward(&cd, role) },
                &registry,
            )
            .unwrap()
        };
        let ping_iface = iface("Ping", "ping", "pong");
        let mut ping_proto = proto("Ping", ("ping", Polarity::Send), ("pong", Polarity::Receive));
        // The liberal part: the initiator may start a new exchange.
        ping_proto.transitions.push(Transition {
            from: "x2".into(),
            operation: "ping".into(),
            polarity: Polarity::Send,
            message: qn("Ping.ping.pingRequest"),
            to: "x1".into(),
        });
        let pong_iface = iface("Pong", "pong", "ping");
        let mut pong_proto = proto("Pong", ("ping", Polarity::Receive), ("pong", Polarity::Send));
        pong_proto.transitions.push(Transition {
            from: "x2".into(),
            operation: "ping".into(),
            polarity: Polarity::Receive,
            message: qn("Pong.ping.pingRequest"),
            to: "x1".into(),
        });
        let adapter_ping = build_adapter("AdapterPing", &ping_iface, &ping_proto, "Ping");
        let adapter_pong = build_adapter("AdapterPong", &pong_iface, &pong_proto, "Pong");
        assert!(adapter_ping.chain.is_empty() && adapter_pong.chain.is_empty());

        let mut ping_stub = ServiceStub::new("Ping", ping_iface, ping_proto);
        ping_stub.script = (0..pings)
            .map(|i| step("ping", serde_json::json!({"n": i as i64 + 1})))
            .collect();
        let mut pong_stub = ServiceStub::new("Pong", pong_iface, pong_proto);
        pong_stub.reactions = vec![super::super::stub::Reaction {
            on: "ping".to_string(),
            send: vec![step("pong", serde_json::json!({"n": 2}))],
        }];

        let mut harness = build_harness(
            &choreo,
            vec![ping_stub, pong_stub],
            vec![cd],
            vec![adapter_ping, adapter_pong],
            &registry,
            7,
        )
        .unwrap();
        harness.set_scenario("ping-pong");
        harness
    }

    #[test]
    fn reactions_fire_on_delivery_and_inherit_the_session() {
        let harness = ping_pong_harness();
        let trace = enact(&harness, 1_000).unwrap();
        trace.validate().unwrap();

        let kinds: Vec<TraceKind> = trace.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TraceKind::Sent,      // ping, scripted
                TraceKind::Forwarded, // delegate passes ping
                TraceKind::Delivered, // ping reaches Pong
                TraceKind::Sent,      // pong, reactive
                TraceKind::Forwarded, // delegate passes pong
                TraceKind::Delivered, // pong reaches Ping
            ]
        );
        // The reactive send runs in the initiator's session: the
        // delegate would otherwise track it as a separate run and
        // refuse the pong (state q0 does not enable it).
        assert!(trace.events.iter().all(|e| e.session == "s1"), "{:?}", trace.events);
        assert_eq!(trace.events[3].from, "Pong");
        assert_eq!(trace.events[5].operation.as_deref(), Some("pong"));
        assert_eq!(trace.events[5].to.as_deref(), Some("Ping"));
    }
}
