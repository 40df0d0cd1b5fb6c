//! Message-level simulation of one frame of multi-agent communication.
//!
//! Each [`AgentState`] holds only its own observation and what it has been
//! sent. A frame runs in two phases on a [`Network`]:
//!
//! 1. handshake: every agent encodes locally and, for scoring policies,
//!    sends its query to each peer; each peer replies with one score;
//! 2. transmission: each agent picks its supporters, requests their
//!    features, fuses what arrives in agent order, and decodes.
//!
//! Results are bit-identical to the centralized forward pass.

mod agent;
mod ledger;
mod message;
mod network;

pub use agent::AgentState;
pub use ledger::{links_per_agent, mbpf, read_trace, write_trace, BandwidthLedger, TraceRecord};
pub use message::{Message, MessageKind, BYTES_PER_REAL, HEADER_BYTES};
pub use network::{run_episode, run_handshake, EpisodeOutcome, Interceptor, Network};
