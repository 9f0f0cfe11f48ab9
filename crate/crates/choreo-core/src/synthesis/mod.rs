//! Synthesis of coordination delegates and protocol adapters.
//!
//! Inputs: a choreography (the global interaction contract), the service
//! protocols, and the mapping reports produced by [`crate::mapping`].
//! Outputs, per interacting role pair:
//!
//! 1. a **coordination delegate** (CD) — a deterministic task automaton
//!    projected from the choreography, which at run time forwards enabled
//!    task messages between the two sides and blocks everything else;
//! 2. one **adapter** per attached service — a chain of routing patterns
//!    (filter, aggregator, splitter, resequencer) that reshapes the
//!    service's messages into the CD's task messages and back.
//!
//! Everything here is symbolic: adapters are validated for type
//! correctness against the registered schemas before any message flows.

mod adapter;
mod choreography;
mod projection;
mod protocol;

pub use adapter::{
    adapter_report, emit_adapter, select_patterns, AdapterSpec, AttachmentSide, InboundRule,
    OutboundRule,
};
pub use choreography::{
    interacting_pairs, ChoreoNode, ChoreographySpec, Edge, NodeKind, TaskNode,
};
pub use projection::{
    cd_id_for, cd_interface_toward, cd_protocol_toward, cd_words, choreography_words, emit_cd,
    synthesize_cd, CdSpec, CdTransition, ForwardRule, TaskLabel,
};
pub use protocol::{Polarity, ProtocolSpec, Transition};

use thiserror::Error;

/// Failures while validating inputs or synthesizing artifacts.
#[derive(Debug, Error)]
pub enum SynthesisError {
    /// The choreography graph is structurally unusable.
    #[error("invalid choreography `{name}`: {detail}")]
    Choreography { name: String, detail: String },

    /// A service protocol is structurally unusable.
    #[error("invalid protocol `{name}`: {detail}")]
    Protocol { name: String, detail: String },

    /// The role pair shares no task, so there is nothing to coordinate.
    #[error("roles `{a}` and `{b}` share no task in the choreography")]
    NoInteraction { a: String, b: String },

    /// The mapping report still carries unresolved ambiguities; synthesis
    /// refuses to guess.
    #[error(
        "mapping between `{service}` and `{counterpart}` has {count} unresolved \
         ambiguity(ies), first involving `{first}`: resolve with hints before synthesis"
    )]
    Ambiguous {
        service: String,
        counterpart: String,
        count: usize,
        first: String,
    },

    /// No combination of patterns can produce a required message; the named
    /// leaf is the first one nothing covers.
    #[error("cannot produce `{message}`: no mapping covers leaf `{message}#{leaf}`")]
    Unsatisfiable { message: String, leaf: String },

    /// Two mapped fragments claim the same target leaf, so a merge would be
    /// nondeterministic.
    #[error("conflicting contributions to `{message}#{leaf}`: {detail}")]
    Conflict {
        message: String,
        leaf: String,
        detail: String,
    },

    /// An operation shape outside the synthesizer's scope.
    #[error("operation `{operation}` of `{service}`: {detail}")]
    Unsupported {
        service: String,
        operation: String,
        detail: String,
    },

    /// The assembled adapter failed its own consistency check — a bug
    /// guard, not a user error.
    #[error("adapter `{id}` failed validation: {detail}")]
    InvalidAdapter { id: String, detail: String },

    #[error(transparent)]
    Pattern(#[from] crate::patterns::PatternError),

    #[error(transparent)]
    Mapping(#[from] crate::mapping::MappingError),

    #[error(transparent)]
    Schema(#[from] crate::schema::SchemaError),
}
