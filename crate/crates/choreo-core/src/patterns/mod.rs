//! The message-routing runtime: typed messages, pattern instances, and the
//! single-threaded pipes-and-filters engine that executes adapter chains.
//!
//! Four routing patterns are supported, mirroring the integration-pattern
//! vocabulary the synthesis stage emits:
//!
//! - **Message Filter** — drops messages whose qualified name is in its
//!   drop set and records the drop;
//! - **Splitter** — turns one message into several, each built by copying
//!   leaf values along a path map;
//! - **Aggregator** — buffers messages per correlation token until every
//!   expected qualified name is present, then emits one merged message;
//! - **Resequencer** — buffers messages per correlation token and releases
//!   them in a configured order, strictly: nothing is released ahead of a
//!   missing predecessor.
//!
//! Processing is deterministic: no clocks, no timeouts, no concurrency.
//! Failures inside a chain (an unroutable payload, a duplicate before
//! aggregation completes) never abort the run — the offending message goes
//! to the dead-letter list and processing continues.

mod engine;
mod instance;
mod message;

pub use engine::{
    aggregator_process, filter_process, resequencer_process, run_chain, splitter_process,
    ChainEvent, ChainExecutor, Channel, DeadLetter, PatternState, ResequencerSlot,
};
pub use instance::{
    validate_chain, AggregatorCfg, CorrelationKey, FilterCfg, MergeSource, PathEdge,
    PatternInstance, ResequencerCfg, SplitPart, SplitterCfg,
};
pub use message::{Headers, RuntimeMessage, Value};

use thiserror::Error;

/// Errors raised by pattern configuration or message processing.
#[derive(Debug, Error)]
pub enum PatternError {
    /// A pattern instance is misconfigured; detected at wiring time,
    /// before any message flows.
    #[error("invalid {pattern} configuration: {detail}")]
    InvalidConfig { pattern: &'static str, detail: String },
    /// A message cannot be routed by the stage that received it. These
    /// become dead letters when raised inside a chain.
    #[error("routing error in {stage}: {detail}")]
    Routing { stage: String, detail: String },
    /// A payload value does not fit the schema it claims to instantiate.
    #[error("payload error for `{qname}`: {detail}")]
    Payload { qname: String, detail: String },
    /// A bounded channel is full.
    #[error("channel `{name}` is full (capacity {capacity})")]
    ChannelFull { name: String, capacity: usize },
}
