//! Scripted service stubs.
//!
//! A stub stands in for a discovered service during enactment: it
//! replays a fixed script of operation invocations and, optionally,
//! reacts to deliveries with further invocations. Its interface and
//! protocol are the same descriptions the synthesis pipeline consumed,
//! so a stub can only ever do what its protocol allows — the scenario
//! is validated by walking the protocol before anything runs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mapping::{Direction, InterfaceSpec, Mep, OperationSpec};
use crate::patterns::Value;
use crate::schema::SchemaRegistry;
use crate::synthesis::{Polarity, ProtocolSpec};

use super::EnactmentError;

/// One scripted invocation: the operation name and the request payload
/// in plain JSON form (checked against the message schema up front).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptStep {
    pub operation: String,
    pub payload: serde_json::Value,
}

/// A reactive rule: when operation `on` is delivered to the stub, it
/// invokes the listed steps, inheriting the trigger's session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Reaction {
    pub on: String,
    pub send: Vec<ScriptStep>,
}

/// A service stub bound to one choreography role.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceStub {
    pub role: String,
    pub interface: InterfaceSpec,
    pub protocol: ProtocolSpec,
    pub script: Vec<ScriptStep>,
    pub reactions: Vec<Reaction>,
}

impl ServiceStub {
    /// A silent stub: answers the interface, scripts nothing.
    pub fn new(role: impl Into<String>, interface: InterfaceSpec, protocol: ProtocolSpec) -> Self {
        ServiceStub {
            role: role.into(),
            interface,
            protocol,
            script: Vec::new(),
            reactions: Vec::new(),
        }
    }

    /// Validates the scenario against the stub's own descriptions:
    /// every scripted or reactive step names a one-way operation of the
    /// right direction with a payload matching its schema, and the
    /// scripted sequence is a walk of the protocol (receives are
    /// treated as uncontrollable, so the walk closes over them).
    pub fn validate(&self, registry: &SchemaRegistry) -> Result<(), EnactmentError> {
        self.protocol.validate()?;
        for (idx, step) in self.script.iter().enumerate() {
            self.check_step(step, Direction::Required, registry, &format!("step {}", idx + 1))?;
        }
        for reaction in &self.reactions {
            match self.interface.operation(&reaction.on) {
                Some(op) if op.direction == Direction::Provided => {}
                Some(_) => {
                    return Err(self.script_error(format!(
                        "reaction trigger `{}` is an operation the stub invokes, not one \
                         it provides",
                        reaction.on
                    )))
                }
                None => {
                    return Err(self.script_error(format!(
                        "reaction trigger `{}` is not an operation of the interface",
                        reaction.on
                    )))
                }
            }
            for (idx, step) in reaction.send.iter().enumerate() {
                self.check_step(
                    step,
                    Direction::Required,
                    registry,
                    &format!("reaction on `{}`, step {}", reaction.on, idx + 1),
                )?;
            }
        }
        self.walk_script()
    }

    /// The operation behind a scripted step, after validation.
    pub fn operation(&self, name: &str) -> Option<&OperationSpec> {
        self.interface.operation(name)
    }

    fn check_step(
        &self,
        step: &ScriptStep,
        direction: Direction,
        registry: &SchemaRegistry,
        at: &str,
    ) -> Result<(), EnactmentError> {
        let op = self.interface.operation(&step.operation).ok_or_else(|| {
            self.script_error(format!(
                "{at}: `{}` is not an operation of the interface",
                step.operation
            ))
        })?;
        if op.direction != direction {
            return Err(self.script_error(format!(
                "{at}: `{}` is provided by the stub, not invoked by it",
                step.operation
            )));
        }
        if op.mep != Mep::OneWay {
            return Err(self.script_error(format!(
                "{at}: `{}` is not one-way",
                step.operation
            )));
        }
        let schema = registry.require(&op.input)?;
        Value::from_json(schema, &step.payload).map_err(|e| {
            self.script_error(format!("{at}: payload does not match `{}`: {e}", op.input))
        })?;
        Ok(())
    }

    /// Scripted sends must be performable in order. Receive transitions
    /// are outside the stub's control, so each position is closed over
    /// them before looking for the next send.
    fn walk_script(&self) -> Result<(), EnactmentError> {
        let mut positions: BTreeSet<&str> =
            self.receive_closure(BTreeSet::from([self.protocol.initial.as_str()]));
        for (idx, step) in self.script.iter().enumerate() {
            let mut next: BTreeSet<&str> = BTreeSet::new();
            for transition in &self.protocol.transitions {
                if transition.polarity == Polarity::Send
                    && transition.operation == step.operation
                    && positions.contains(transition.from.as_str())
                {
                    next.insert(transition.to.as_str());
                }
            }
            if next.is_empty() {
                return Err(self.script_error(format!(
                    "step {}: the protocol does not allow sending `{}` at this point",
                    idx + 1,
                    step.operation
                )));
            }
            positions = self.receive_closure(next);
        }
        Ok(())
    }

    fn receive_closure<'a>(&'a self, seed: BTreeSet<&'a str>) -> BTreeSet<&'a str> {
        let mut seen = seed.clone();
        let mut queue: Vec<&str> = seed.into_iter().collect();
        while let Some(state) = queue.pop() {
            for transition in &self.protocol.transitions {
                if transition.polarity == Polarity::Receive
                    && transition.from == state
                    && seen.insert(transition.to.as_str())
                {
                    queue.push(transition.to.as_str());
                }
            }
        }
        seen
    }

    fn script_error(&self, detail: String) -> EnactmentError {
        EnactmentError::Script { service: self.interface.service.clone(), detail }
    }
}
