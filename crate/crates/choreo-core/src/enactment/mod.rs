//! Deterministic in-process enactment of an adapted system.
//!
//! The harness wires three kinds of components the way the synthesized
//! architecture prescribes — scripted service stubs at the edges,
//! coordination delegates in the middle, adapters between them — and
//! runs a single-threaded event loop over logical ticks:
//!
//! * a **stub** replays a scripted sequence of operation invocations
//!   (plus reactive rules: on receiving X, send Y), standing in for a
//!   discovered service;
//! * an **adapter** threads each message through its pattern chain and
//!   routes whatever comes out the far end;
//! * a **delegate** consults its enforcement automaton per session and
//!   either forwards the interaction to the opposite side or blocks it,
//!   recording the refusal.
//!
//! Every movement is recorded as a [`TraceEvent`]; the trace is the
//! system's observable behavior and the input to conformance checking,
//! which replays the delegate-forwarded task sequence against the
//! choreography itself.
//!
//! Everything is deterministic: components are visited in declaration
//! order, queues are FIFO, and ticks are logical. Two runs over the same
//! inputs produce byte-identical trace files.

mod conformance;
mod harness;
mod stub;
mod trace;

pub use conformance::{
    check_conformance, ConformanceReport, Coverage, Verdict, Violation,
};
pub use harness::{build_harness, enact, Harness};
pub(crate) use harness::mirrors_face;
pub use stub::{Reaction, ScriptStep, ServiceStub};
pub use trace::{Trace, TraceEvent, TraceKind, TraceMeta};

use thiserror::Error;

use crate::patterns::PatternError;
use crate::schema::{QName, SchemaError};
use crate::synthesis::SynthesisError;

/// Failures while wiring or running the harness, or while analyzing a
/// trace.
#[derive(Debug, Error)]
pub enum EnactmentError {
    /// A choreography role has no service stub bound to it.
    #[error("role `{role}` is not bound to any service stub")]
    UnboundRole { role: String },

    /// A stub differs from its delegate's face and no adapter bridges
    /// the gap.
    #[error(
        "no adapter connects `{service}` to delegate `{cd}`, and their \
         interfaces do not match directly"
    )]
    MissingAdapter { service: String, cd: String },

    /// Any other wiring defect: duplicate bindings, adapters that
    /// connect nothing, routes naming unknown components, operations
    /// that reach no delegate.
    #[error("wiring: {detail}")]
    Wiring { detail: String },

    /// A scenario script that its own stub cannot perform.
    #[error("script for `{service}`: {detail}")]
    Script { service: String, detail: String },

    /// A trace event references a message that names no choreography
    /// task.
    #[error("trace references `{qname}`, which names no choreography task")]
    UnknownTask { qname: QName },

    /// A trace file line that does not parse.
    #[error("trace line {line}: {detail}")]
    TraceFormat { line: usize, detail: String },

    #[error(transparent)]
    Pattern(#[from] PatternError),

    #[error(transparent)]
    Schema(#[from] SchemaError),

    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}
