//! Service protocols: finite state machines over send/receive events.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::schema::QName;

use super::SynthesisError;

/// Direction of a protocol event from the owning service's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// The service emits the message.
    Send,
    /// The service consumes the message.
    Receive,
}

/// One protocol transition: in state `from`, the service may perform
/// `operation` with the given polarity, carrying `message`, and move to
/// state `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transition {
    pub from: String,
    pub operation: String,
    pub polarity: Polarity,
    pub message: QName,
    pub to: String,
}

/// The behavioral contract of one service: which operations it may
/// perform, in which order. Deterministic: a state never offers the same
/// (operation, polarity) twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProtocolSpec {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: Vec<String>,
    pub transitions: Vec<Transition>,
}

impl ProtocolSpec {
    /// Structural validation: distinct known states, reachability from the
    /// initial state, and label determinism.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let err = |detail: String| SynthesisError::Protocol {
            name: self.name.clone(),
            detail,
        };
        if self.states.is_empty() {
            return Err(err("no states".to_string()));
        }
        let states: BTreeSet<&str> = self.states.iter().map(String::as_str).collect();
        if states.len() != self.states.len() {
            return Err(err("duplicate state names".to_string()));
        }
        if !states.contains(self.initial.as_str()) {
            return Err(err(format!("unknown initial state `{}`", self.initial)));
        }
        for state in &self.finals {
            if !states.contains(state.as_str()) {
                return Err(err(format!("unknown final state `{state}`")));
            }
        }
        let mut labels = BTreeSet::new();
        for t in &self.transitions {
            for endpoint in [&t.from, &t.to] {
                if !states.contains(endpoint.as_str()) {
                    return Err(err(format!(
                        "transition references unknown state `{endpoint}`"
                    )));
                }
            }
            if !labels.insert((t.from.as_str(), t.operation.as_str(), t.polarity)) {
                return Err(err(format!(
                    "state `{}` offers `{}` twice with the same polarity",
                    t.from, t.operation
                )));
            }
        }
        let reachable = self.reachable_states();
        for state in &self.states {
            if !reachable.contains(state.as_str()) {
                return Err(err(format!("state `{state}` is unreachable")));
            }
        }
        Ok(())
    }

    fn reachable_states(&self) -> BTreeSet<&str> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::from([self.initial.as_str()]);
        seen.insert(self.initial.as_str());
        while let Some(state) = queue.pop_front() {
            for t in self.transitions.iter().filter(|t| t.from == state) {
                if seen.insert(t.to.as_str()) {
                    queue.push_back(t.to.as_str());
                }
            }
        }
        seen
    }

    /// Transitions leaving a state, declaration order.
    pub fn outgoing(&self, state: &str) -> Vec<&Transition> {
        self.transitions.iter().filter(|t| t.from == state).collect()
    }

    /// Messages with the given polarity in breadth-first
    /// first-occurrence order from the initial state. This is the
    /// protocol's own notion of "what comes first" and is what pattern
    /// selection uses to order aggregation inputs and resequencer
    /// releases.
    pub fn first_message_order(&self, polarity: Polarity) -> Vec<QName> {
        let mut order = Vec::new();
        let mut seen_states = BTreeSet::new();
        let mut queue = VecDeque::from([self.initial.as_str()]);
        seen_states.insert(self.initial.as_str());
        while let Some(state) = queue.pop_front() {
            for t in self.transitions.iter().filter(|t| t.from == state) {
                if t.polarity == polarity && !order.contains(&t.message) {
                    order.push(t.message.clone());
                }
                if seen_states.insert(t.to.as_str()) {
                    queue.push_back(t.to.as_str());
                }
            }
        }
        order
    }
}
