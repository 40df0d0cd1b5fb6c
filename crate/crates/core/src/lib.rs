//! Learned communication groups for multi-agent perception.
//!
//! Every agent compresses its observation into a small query (broadcast) and
//! a larger key (kept local). Scaled general attention between queries and
//! keys gives a row-stochastic matching matrix; thresholding it yields the
//! directed communication graph, whose diagonal decides *when* an agent
//! needs help and whose off-diagonal entries decide *whom* to ask.
//!
//! Module map:
//!
//! - [`densemath`]: matrices, softmax, activations, the seeded generator.
//! - [`commgraph`]: attention scores, matching/pruned matrices, fusion.
//! - [`neuralnet`]: the trainable pipeline with hand-written backprop.
//! - [`simnet`]: decentralized message-passing execution with a byte ledger.
//! - [`scenarios`]: synthetic SRMS / MRMS / MRMPS / triplet episodes.
//! - [`evalcli`]: metrics, baselines, sweeps and the command-line tool.

pub mod commgraph;
pub mod densemath;
pub mod error;
pub mod evalcli;
pub mod neuralnet;
pub mod policy;
pub mod scenarios;
pub mod simnet;

pub use error::{Error, Result};
pub use policy::Policy;
