//! Trace recording and its line-delimited file form.
//!
//! A trace is one run's complete observable behavior: a metadata header
//! followed by one event per message movement. The file rendering puts
//! one canonical JSON object per line (header first), so traces diff
//! cleanly and identical runs produce identical bytes.

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::schema::QName;

use super::EnactmentError;

/// What happened to a message at one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    /// A stub invoked an operation (scripted or reactive).
    Sent,
    /// A delegate let an interaction pass toward the opposite side.
    Forwarded,
    /// An adapter's message filter discarded the message.
    Dropped,
    /// A delegate refused an interaction its automaton does not enable.
    Blocked,
    /// An adapter could not process or route the message.
    DeadLetter,
    /// A message reached a service stub.
    Delivered,
}

/// One message movement. `to` is absent for terminal events (dropped,
/// blocked, dead-letter); `operation` is absent where no operation is
/// in play; `detail` carries the stage or reason for terminal events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: TraceKind,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<String>,
    pub qname: QName,
    pub session: String,
    /// Canonical payload digest — compact but value-checkable.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Run metadata, written as the trace file's first line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    /// False when the run bypassed delegate enforcement.
    pub enforcement: bool,
    /// True when the tick budget ran out with work still queued.
    pub incomplete: bool,
}

/// A complete run record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Structural sanity: ticks strictly increase, and every delivery
    /// belongs to a session some stub actually opened with a send.
    pub fn validate(&self) -> Result<(), EnactmentError> {
        let mut last = 0u64;
        for event in &self.events {
            if event.tick <= last {
                return Err(EnactmentError::TraceFormat {
                    line: event.tick as usize,
                    detail: format!("tick {} does not increase", event.tick),
                });
            }
            last = event.tick;
            if event.kind == TraceKind::Delivered {
                let opened = self.events.iter().any(|e| {
                    e.kind == TraceKind::Sent
                        && e.session == event.session
                        && e.tick < event.tick
                });
                if !opened {
                    return Err(EnactmentError::TraceFormat {
                        line: event.tick as usize,
                        detail: format!(
                            "delivery in session `{}` has no earlier send",
                            event.session
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Events of one kind, in trace order.
    pub fn events_of(&self, kind: TraceKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// The line-delimited canonical rendering: header line, then one
    /// event per line.
    pub fn to_jsonl(&self) -> String {
        let mut out =
            canon::to_canonical_string(&serde_json::to_value(&self.meta).expect("meta serializes"));
        for event in &self.events {
            out.push_str(&canon::to_canonical_string(
                &serde_json::to_value(event).expect("events serialize"),
            ));
        }
        out
    }

    /// Parses a trace file written by [`Trace::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Result<Trace, EnactmentError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EnactmentError::TraceFormat {
            line: 1,
            detail: "empty trace file".to_string(),
        })?;
        let meta: TraceMeta =
            serde_json::from_str(header).map_err(|e| EnactmentError::TraceFormat {
                line: 1,
                detail: e.to_string(),
            })?;
        let mut events = Vec::new();
        for (idx, line) in lines {
            let event: TraceEvent =
                serde_json::from_str(line).map_err(|e| EnactmentError::TraceFormat {
                    line: idx + 1,
                    detail: e.to_string(),
                })?;
            events.push(event);
        }
        Ok(Trace { meta, events })
    }
}
