//! Conformance: replaying a trace against the choreography.
//!
//! The delegate-forwarded events are the trace's task instances — a
//! forward is the moment an interaction actually crosses between two
//! roles — so the checker replays them, per session, as a walk over the
//! choreography's flow graph. Positions are *sets* of nodes (the flow
//! graph may branch), closed over the non-task nodes; a forwarded task
//! with no matching node in the current position set is a violation and
//! does not advance the walk. Blocked events are collected separately
//! as prevented violations: they are evidence the delegates did their
//! job, not misbehavior of the system.
//!
//! An incomplete trace (tick budget ran out) is analyzed as far as it
//! goes — the caller sees the `incomplete` flag on the trace itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::schema::QName;
use crate::synthesis::ChoreographySpec;

use super::trace::{Trace, TraceEvent, TraceKind};
use super::EnactmentError;

/// Overall outcome: `Violations` exactly when the list is non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Conformant,
    Violations,
}

/// A forwarded task the choreography does not allow at that point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub event: TraceEvent,
    /// The session's position set when the event arrived.
    pub state: String,
    pub reason: String,
}

/// How much of the choreography the trace exercised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Coverage {
    pub exercised: usize,
    pub total: usize,
    /// Node ids of the exercised tasks, sorted.
    pub tasks: Vec<String>,
}

/// The complete analysis of one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConformanceReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    /// Blocked events: interactions a delegate refused.
    pub prevented: Vec<TraceEvent>,
    pub coverage: Coverage,
}

impl ConformanceReport {
    /// Human-readable rendering, used for the text artifact.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "verdict: {}\n",
            match self.verdict {
                Verdict::Conformant => "conformant",
                Verdict::Violations => "violations",
            }
        );
        out.push_str(&format!(
            "coverage: {}/{} tasks exercised",
            self.coverage.exercised, self.coverage.total
        ));
        if !self.coverage.tasks.is_empty() {
            out.push_str(&format!(" ({})", self.coverage.tasks.join(", ")));
        }
        out.push('\n');
        out.push_str(&format!("prevented: {}\n", self.prevented.len()));
        for event in &self.prevented {
            out.push_str(&format!(
                "  - tick {}: `{}` (session {}) {}\n",
                event.tick,
                event.qname,
                event.session,
                event.detail.as_deref().unwrap_or("blocked"),
            ));
        }
        out.push_str(&format!("violations: {}\n", self.violations.len()));
        for violation in &self.violations {
            out.push_str(&format!(
                "  - tick {}: `{}` (session {}) {} at positions {}\n",
                violation.event.tick,
                violation.event.qname,
                violation.event.session,
                violation.reason,
                violation.state,
            ));
        }
        out
    }
}

/// Replays the trace's forwarded events against the choreography. Fails
/// only when an event references a message that names no task at all;
/// out-of-order tasks become violations in the report.
pub fn check_conformance(
    trace: &Trace,
    choreo: &ChoreographySpec,
) -> Result<ConformanceReport, EnactmentError> {
    choreo.validate()?;

    let tasks = choreo.tasks();
    let mut nodes_of_message: BTreeMap<&QName, Vec<&str>> = BTreeMap::new();
    for (id, task) in &tasks {
        nodes_of_message.entry(&task.message).or_default().push(id);
    }
    let task_ids: BTreeSet<&str> = tasks.iter().map(|(id, _)| *id).collect();

    fn closure<'a>(
        choreo: &'a ChoreographySpec,
        task_ids: &BTreeSet<&str>,
        seed: BTreeSet<&'a str>,
    ) -> BTreeSet<&'a str> {
        let mut seen = seed.clone();
        let mut queue: VecDeque<&str> = seed.into_iter().collect();
        while let Some(id) = queue.pop_front() {
            if task_ids.contains(id) {
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

    let mut positions: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut prevented = Vec::new();
    let mut exercised: BTreeSet<&str> = BTreeSet::new();

    for event in &trace.events {
        match event.kind {
            TraceKind::Forwarded | TraceKind::Blocked => {}
            _ => continue,
        }
        let candidates = nodes_of_message.get(&event.qname).ok_or_else(|| {
            EnactmentError::UnknownTask { qname: event.qname.clone() }
        })?;
        if event.kind == TraceKind::Blocked {
            prevented.push(event.clone());
            continue;
        }
        let here = positions.entry(event.session.as_str()).or_insert_with(|| {
            closure(choreo, &task_ids, BTreeSet::from([choreo.start_id()]))
        });
        let matched: Vec<&str> =
            candidates.iter().filter(|id| here.contains(*id)).copied().collect();
        if matched.is_empty() {
            violations.push(Violation {
                event: event.clone(),
                state: format!(
                    "{{{}}}",
                    here.iter().copied().collect::<Vec<_>>().join(", ")
                ),
                reason: format!(
                    "task `{}` is not enabled",
                    event.operation.as_deref().unwrap_or("?")
                ),
            });
            continue;
        }
        let mut seed = BTreeSet::new();
        for id in &matched {
            exercised.insert(id);
            seed.extend(choreo.successor_ids(id));
        }
        *here = closure(choreo, &task_ids, seed);
    }

    let verdict = if violations.is_empty() { Verdict::Conformant } else { Verdict::Violations };
    let coverage = Coverage {
        exercised: exercised.len(),
        total: tasks.len(),
        tasks: exercised.iter().map(|id| id.to_string()).collect(),
    };
    Ok(ConformanceReport { verdict, violations, prevented, coverage })
}
