//! Synthesis and enactment of protocol adapters for choreographed services.
//!
//! Given interface descriptions (message schemas in an XSD subset or a
//! compact JSON form), behavioral protocols, and a choreography naming the
//! interactions between roles, this crate:
//!
//! 1. parses and validates the message schemas ([`schema`]);
//! 2. infers data mappings between each service and its role-level
//!    counterpart by structural subtyping over schema leaves ([`mapping`]);
//! 3. synthesizes a coordination delegate per interacting role pair — a
//!    finite-state machine projected from the choreography that blocks
//!    out-of-order interactions ([`synthesis`]);
//! 4. selects message-routing patterns (Message Filter, Aggregator,
//!    Splitter, Resequencer) and composes them into per-service adapter
//!    chains ([`patterns`], [`synthesis`]);
//! 5. executes the adapted system in a deterministic, single-threaded
//!    pipes-and-filters harness and checks the recorded trace against the
//!    choreography ([`enactment`]).
//!
//! Everything the pipeline writes is rendered canonically ([`canon`]) so
//! repeated runs over identical inputs produce byte-identical artifacts.

pub mod canon;
pub mod enactment;
pub mod mapping;
pub mod patterns;
pub mod project;
pub mod schema;
pub mod synthesis;

#[cfg(test)]
pub(crate) mod testutil;

pub use schema::{
    FieldPath, MessageSchema, PrimitiveKind, QName, SchemaError, SchemaRegistry, TypeNode,
};
