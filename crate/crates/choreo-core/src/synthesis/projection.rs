//! Projection of a choreography onto one role pair: the coordination
//! delegate (CD).
//!
//! The projection treats the choreography graph as a nondeterministic
//! automaton whose states are "node about to execute": a task of the
//! pair is a labeled transition to its successor, every other node is an
//! ε-step. Determinizing by ε-closure subset construction yields the
//! delegate's task automaton. At run time the delegate forwards a task
//! message only when its automaton enables that task, which is exactly
//! how out-of-contract traffic gets blocked.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::mapping::{Direction, InterfaceSpec, Mep, OperationSpec};
use crate::schema::QName;

use super::choreography::{ChoreographySpec, NodeKind, TaskNode};
use super::protocol::{Polarity, ProtocolSpec, Transition};
use super::SynthesisError;

/// The observable identity of a task: who sends what to whom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskLabel {
    pub operation: String,
    pub message: QName,
    pub initiator: String,
    pub recipient: String,
}

impl TaskLabel {
    fn of(task: &TaskNode) -> Self {
        TaskLabel {
            operation: task.operation.clone(),
            message: task.message.clone(),
            initiator: task.initiator.clone(),
            recipient: task.recipient.clone(),
        }
    }
}

/// One transition of the delegate's deterministic task automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CdTransition {
    pub from: String,
    pub task: TaskLabel,
    pub to: String,
}

/// Run-time routing entry: a message arriving from `from_role`'s side is
/// forwarded toward `to_role`'s side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForwardRule {
    pub operation: String,
    pub message: QName,
    pub from_role: String,
    pub to_role: String,
}

/// A synthesized coordination delegate for one role pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CdSpec {
    pub id: String,
    /// `(first, second)` — orientation of the pair, initiator of the
    /// pair's first task first.
    pub roles: (String, String),
    /// When true (the default) the delegate blocks messages its automaton
    /// does not enable; enactment can bypass this for experiments.
    pub enforcement: bool,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: Vec<String>,
    pub transitions: Vec<CdTransition>,
    pub forwards: Vec<ForwardRule>,
}

impl CdSpec {
    /// Transitions leaving a state, declaration order.
    pub fn outgoing(&self, state: &str) -> Vec<&CdTransition> {
        self.transitions.iter().filter(|t| t.from == state).collect()
    }

    /// The transition a message enables from `state`, if any.
    pub fn enabled(&self, state: &str, message: &QName) -> Option<&CdTransition> {
        self.transitions
            .iter()
            .find(|t| t.from == state && &t.task.message == message)
    }

    pub fn forward_for(&self, message: &QName) -> Option<&ForwardRule> {
        self.forwards.iter().find(|f| &f.message == message)
    }
}

/// The delegate id for an oriented role pair.
pub fn cd_id_for(first: &str, second: &str) -> String {
    format!("CD_{first}_{second}")
}

/// Projects the choreography onto the `{a, b}` role pair and returns the
/// delegate. Errors when the pair shares no task.
pub fn synthesize_cd(
    choreo: &ChoreographySpec,
    a: &str,
    b: &str,
) -> Result<CdSpec, SynthesisError> {
    choreo.validate()?;
    let is_pair = |task: &TaskNode| {
        (task.initiator == a && task.recipient == b)
            || (task.initiator == b && task.recipient == a)
    };
    let pair_tasks: Vec<(&str, &TaskNode)> = choreo
        .tasks()
        .into_iter()
        .filter(|(_, task)| is_pair(task))
        .collect();
    let first = pair_tasks.first().ok_or_else(|| SynthesisError::NoInteraction {
        a: a.to_string(),
        b: b.to_string(),
    })?;
    let roles = (first.1.initiator.clone(), first.1.recipient.clone());
    let id = cd_id_for(&roles.0, &roles.1);

    // ε-closure: follow successors of everything that is not a task of
    // this pair. End nodes simply have no successors.
    let node_index: BTreeMap<&str, &NodeKind> =
        choreo.nodes.iter().map(|n| (n.id.as_str(), &n.kind)).collect();
    let pair_node_ids: BTreeSet<&str> = pair_tasks.iter().map(|(id, _)| *id).collect();
    fn closure<'a>(
        choreo: &'a ChoreographySpec,
        pair_node_ids: &BTreeSet<&str>,
        seed: BTreeSet<&'a str>,
    ) -> BTreeSet<&'a str> {
        let mut seen = seed.clone();
        let mut queue: VecDeque<&'a str> = seed.into_iter().collect();
        while let Some(id) = queue.pop_front() {
            if pair_node_ids.contains(id) {
                continue;
            }
            for next in choreo.successor_ids(id) {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    // Subset construction, breadth-first, states named q0, q1, … in
    // discovery order. Outgoing labels are explored in node document
    // order so the numbering is deterministic.
    let initial_set = closure(choreo, &pair_node_ids, BTreeSet::from([choreo.start_id()]));
    let mut names: BTreeMap<BTreeSet<&str>, String> = BTreeMap::new();
    names.insert(initial_set.clone(), "q0".to_string());
    let mut order: Vec<BTreeSet<&str>> = vec![initial_set.clone()];
    let mut queue = VecDeque::from([initial_set]);
    let mut transitions = Vec::new();
    while let Some(set) = queue.pop_front() {
        let from = names[&set].clone();
        // Distinct labels offered by this subset, document order.
        let mut labels: Vec<TaskLabel> = Vec::new();
        for (node_id, task) in &pair_tasks {
            if set.contains(node_id) {
                let label = TaskLabel::of(task);
                if !labels.contains(&label) {
                    labels.push(label);
                }
            }
        }
        for label in labels {
            let mut seed = BTreeSet::new();
            for (node_id, task) in &pair_tasks {
                if set.contains(node_id) && TaskLabel::of(task) == label {
                    seed.extend(choreo.successor_ids(node_id));
                }
            }
            let next = closure(choreo, &pair_node_ids, seed);
            let to = names.entry(next.clone()).or_insert_with(|| {
                order.push(next.clone());
                queue.push_back(next.clone());
                format!("q{}", order.len() - 1)
            });
            transitions.push(CdTransition { from: from.clone(), task: label, to: to.clone() });
        }
    }

    let is_end = |id: &str| matches!(node_index[id], NodeKind::End);
    let states: Vec<String> = (0..order.len()).map(|i| format!("q{i}")).collect();
    let finals: Vec<String> = order
        .iter()
        .enumerate()
        .filter(|(_, set)| set.iter().any(|id| is_end(id)))
        .map(|(i, _)| format!("q{i}"))
        .collect();

    let mut forwards: Vec<ForwardRule> = Vec::new();
    for (_, task) in &pair_tasks {
        let rule = ForwardRule {
            operation: task.operation.clone(),
            message: task.message.clone(),
            from_role: task.initiator.clone(),
            to_role: task.recipient.clone(),
        };
        if !forwards.contains(&rule) {
            forwards.push(rule);
        }
    }

    Ok(CdSpec {
        id,
        roles,
        enforcement: true,
        states,
        initial: "q0".to_string(),
        finals,
        transitions,
        forwards,
    })
}

/// The delegate's interface as seen from one attached role: operations
/// the role initiates are *provided* by the delegate (it accepts them),
/// operations directed at the role are *required* (the delegate will
/// invoke the role's side). All delegate traffic is one-way.
pub fn cd_interface_toward(cd: &CdSpec, role: &str) -> Result<InterfaceSpec, SynthesisError> {
    let mut operations = Vec::new();
    for rule in &cd.forwards {
        let direction = if rule.from_role == role {
            Direction::Provided
        } else if rule.to_role == role {
            Direction::Required
        } else {
            continue;
        };
        operations.push(OperationSpec {
            name: rule.operation.clone(),
            direction,
            mep: Mep::OneWay,
            input: rule.message.clone(),
            output: None,
        });
    }
    Ok(InterfaceSpec::new(&cd.id, operations)?)
}

/// The delegate's behavior as a protocol on the attachment toward one
/// role: tasks the role initiates are receives (the delegate consumes
/// them from that side), tasks directed at the role are sends.
pub fn cd_protocol_toward(cd: &CdSpec, role: &str) -> ProtocolSpec {
    let transitions = cd
        .transitions
        .iter()
        .map(|t| Transition {
            from: t.from.clone(),
            operation: t.task.operation.clone(),
            polarity: if t.task.initiator == role {
                Polarity::Receive
            } else {
                Polarity::Send
            },
            message: t.task.message.clone(),
            to: t.to.clone(),
        })
        .collect();
    ProtocolSpec {
        name: cd.id.clone(),
        states: cd.states.clone(),
        initial: cd.initial.clone(),
        finals: cd.finals.clone(),
        transitions,
    }
}

/// Canonical JSON rendering of a delegate.
pub fn emit_cd(cd: &CdSpec) -> String {
    let value = serde_json::to_value(cd).expect("delegate specs serialize");
    crate::canon::to_canonical_string(&value)
}

/// Oracle: every operation word of length ≤ `max_len` the choreography
/// can produce for the `{a, b}` pair — walks from start to an end node,
/// projected onto the pair's tasks. Exhaustive over (node, word) states,
/// so ε-cycles terminate.
pub fn choreography_words(
    choreo: &ChoreographySpec,
    a: &str,
    b: &str,
    max_len: usize,
) -> BTreeSet<Vec<String>> {
    let mut words = BTreeSet::new();
    let mut seen: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let start = (choreo.start_id().to_string(), Vec::new());
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some((id, word)) = queue.pop_front() {
        let node = choreo.node(&id).expect("walk stays inside the graph");
        match &node.kind {
            NodeKind::End => {
                words.insert(word);
            }
            kind => {
                let extended = match kind {
                    NodeKind::Task(task)
                        if (task.initiator == a && task.recipient == b)
                            || (task.initiator == b && task.recipient == a) =>
                    {
                        if word.len() == max_len {
                            continue; // the word would exceed the bound
                        }
                        let mut next = word.clone();
                        next.push(task.operation.clone());
                        next
                    }
                    _ => word,
                };
                for succ in choreo.successor_ids(&id) {
                    let state = (succ.to_string(), extended.clone());
                    if seen.insert(state.clone()) {
                        queue.push_back(state);
                    }
                }
            }
        }
    }
    words
}

/// Oracle: every operation word of length ≤ `max_len` the delegate's
/// automaton accepts.
pub fn cd_words(cd: &CdSpec, max_len: usize) -> BTreeSet<Vec<String>> {
    let mut words = BTreeSet::new();
    let mut seen: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let start = (cd.initial.clone(), Vec::new());
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some((state, word)) = queue.pop_front() {
        if cd.finals.contains(&state) {
            words.insert(word.clone());
        }
        if word.len() == max_len {
            continue;
        }
        for t in cd.outgoing(&state) {
            let mut next = word.clone();
            next.push(t.task.operation.clone());
            let key = (t.to.clone(), next);
            if seen.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    words
}
