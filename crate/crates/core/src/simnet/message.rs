use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wire header: kind (1) + from (2) + to (2) + payload length in bytes (4).
pub const HEADER_BYTES: usize = 9;
/// Payload reals travel as little-endian `f32`.
pub const BYTES_PER_REAL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    /// Requester's query, one copy per peer.
    QueryBroadcast,
    /// Supporter's scalar matching score for a received query.
    ScoreReply,
    /// Requester asks a selected supporter for its feature.
    FeatureRequest,
    /// Supporter's encoded feature.
    FeatureTransfer,
}

impl MessageKind {
    pub fn tag(self) -> u8 {
        match self {
            MessageKind::QueryBroadcast => 1,
            MessageKind::ScoreReply => 2,
            MessageKind::FeatureRequest => 3,
            MessageKind::FeatureTransfer => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(MessageKind::QueryBroadcast),
            2 => Some(MessageKind::ScoreReply),
            3 => Some(MessageKind::FeatureRequest),
            4 => Some(MessageKind::FeatureTransfer),
            _ => None,
        }
    }

    /// Whether payload bytes of this kind count towards MBpf.
    pub fn is_counted(self) -> bool {
        matches!(self, MessageKind::QueryBroadcast | MessageKind::FeatureTransfer)
    }
}

/// One directed message between two distinct agents.
///
/// The simulator keeps payloads in `f64` so distributed results stay
/// bit-identical to the centralized path; byte accounting and [`encode`]
/// model the `f32` wire format.
///
/// [`encode`]: Message::encode
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    kind: MessageKind,
    from: usize,
    to: usize,
    payload: Vec<f64>,
}

impl Message {
    /// Validates `from != to`, id range, and the payload length for `kind`.
    /// `query_dim`/`feature_dim` fix the expected lengths.
    pub fn new(
        kind: MessageKind,
        from: usize,
        to: usize,
        payload: Vec<f64>,
        query_dim: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        if from == to {
            return Err(Error::Protocol(format!("{kind:?} from agent {from} to itself")));
        }
        if from > u16::MAX as usize || to > u16::MAX as usize {
            return Err(Error::Protocol("agent id exceeds 16-bit wire field".into()));
        }
        let expected = match kind {
            MessageKind::QueryBroadcast => query_dim,
            MessageKind::ScoreReply => 1,
            MessageKind::FeatureRequest => 0,
            MessageKind::FeatureTransfer => feature_dim,
        };
        if payload.len() != expected {
            return Err(Error::Protocol(format!(
                "{kind:?} payload of {} reals, expected {expected}",
                payload.len()
            )));
        }
        Ok(Self {
            kind,
            from,
            to,
            payload,
        })
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn from(&self) -> usize {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn payload(&self) -> &[f64] {
        &self.payload
    }

    /// Same envelope with a replacement payload of equal length.
    pub fn with_payload(mut self, payload: Vec<f64>) -> Result<Self> {
        if payload.len() != self.payload.len() {
            return Err(Error::Protocol(format!(
                "replacement payload of {} reals, expected {}",
                payload.len(),
                self.payload.len()
            )));
        }
        self.payload = payload;
        Ok(self)
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload.len() * BYTES_PER_REAL
    }

    pub fn wire_len(&self) -> usize {
        HEADER_BYTES + self.payload_bytes()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(self.kind.tag());
        out.extend_from_slice(&(self.from as u16).to_le_bytes());
        out.extend_from_slice(&(self.to as u16).to_le_bytes());
        out.extend_from_slice(&(self.payload_bytes() as u32).to_le_bytes());
        for &v in &self.payload {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Parses one encoded message (payload widened back from `f32`).
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Protocol("truncated header".into()));
        }
        let kind = MessageKind::from_tag(bytes[0]).ok_or_else(|| Error::Protocol(format!("bad kind {}", bytes[0])))?;
        let from = u16::from_le_bytes([bytes[1], bytes[2]]) as usize;
        let to = u16::from_le_bytes([bytes[3], bytes[4]]) as usize;
        let len = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]) as usize;
        if bytes.len() != HEADER_BYTES + len || len % BYTES_PER_REAL != 0 {
            return Err(Error::Protocol(format!("payload length {len} vs {} bytes", bytes.len())));
        }
        let payload: Vec<f64> = bytes[HEADER_BYTES..]
            .chunks_exact(BYTES_PER_REAL)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        if from == to {
            return Err(Error::Protocol("self-addressed message".into()));
        }
        Ok(Self {
            kind,
            from,
            to,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constructor_validates() {
        assert!(Message::new(MessageKind::FeatureRequest, 1, 1, vec![], 4, 32).is_err());
        assert!(Message::new(MessageKind::QueryBroadcast, 0, 1, vec![0.0; 3], 4, 32).is_err());
        assert!(Message::new(MessageKind::ScoreReply, 0, 1, vec![0.5], 4, 32).is_ok());
    }

    #[test]
    fn wire_sizes() {
        let q = Message::new(MessageKind::QueryBroadcast, 0, 1, vec![0.0; 4], 4, 32).unwrap();
        assert_eq!(q.encode().len(), 9 + 16);
        let r = Message::new(MessageKind::FeatureRequest, 2, 1, vec![], 4, 32).unwrap();
        assert_eq!(r.encode(), vec![3, 2, 0, 1, 0, 0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(from in 0usize..300, hop in 1usize..300, vals in proptest::collection::vec(-1e6f32..1e6, 4)) {
            let to = from + hop;
            let payload: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
            let m = Message::new(MessageKind::QueryBroadcast, from, to, payload, 4, 32).unwrap();
            let bytes = m.encode();
            prop_assert_eq!(bytes.len(), m.wire_len());
            prop_assert_eq!(Message::decode(&bytes).unwrap(), m);
        }
    }
}
