use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Communication policy: the full learned model or one of the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    /// Handshake, self-attention and δ-pruning.
    When2com,
    /// No communication; each agent fuses only its own feature.
    NoCom,
    /// One uniformly random peer, no handshake.
    RandCom,
    /// Mean of every agent's feature, no handshake.
    CatAll,
    /// Handshake without self-attention; the best-scoring peer is always used.
    ForcedTop1,
    /// Handshake with unpruned softmax fusion over all agents.
    FullyConnected,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::When2com,
        Policy::NoCom,
        Policy::RandCom,
        Policy::CatAll,
        Policy::ForcedTop1,
        Policy::FullyConnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::When2com => "when2com",
            Policy::NoCom => "nocom",
            Policy::RandCom => "randcom",
            Policy::CatAll => "catall",
            Policy::ForcedTop1 => "forcedtop1",
            Policy::FullyConnected => "fullyconnected",
        }
    }

    /// Stable numeric tag used in checkpoints.
    pub fn code(self) -> u32 {
        match self {
            Policy::When2com => 0,
            Policy::NoCom => 1,
            Policy::RandCom => 2,
            Policy::CatAll => 3,
            Policy::ForcedTop1 => 4,
            Policy::FullyConnected => 5,
        }
    }

    pub fn from_code(code: u32) -> Option<Policy> {
        Policy::ALL.into_iter().find(|p| p.code() == code)
    }

    /// Whether the policy runs the query/score handshake.
    pub fn uses_handshake(self) -> bool {
        matches!(
            self,
            Policy::When2com | Policy::ForcedTop1 | Policy::FullyConnected
        )
    }

    /// Whether a checkpoint trained under `trained` can be evaluated under `self`.
    ///
    /// FullyConnected and When2com share the same training objective and
    /// differ only in inference-time pruning.
    pub fn compatible_with(self, trained: Policy) -> bool {
        self == trained
            || matches!(
                (self, trained),
                (Policy::FullyConnected, Policy::When2com)
                    | (Policy::When2com, Policy::FullyConnected)
            )
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown policy '{s}'")))
    }
}
