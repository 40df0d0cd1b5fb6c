use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::message::{Message, MessageKind, HEADER_BYTES};
use crate::error::{Error, Result};

/// Byte counts of everything sent during a run.
///
/// `counted_bytes` covers query and feature payloads (the MBpf numerator);
/// score replies, feature requests and every header go to `control_bytes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthLedger {
    pub counted_bytes: u64,
    pub control_bytes: u64,
    /// Number of feature transfers.
    pub inter_agent_links: u64,
    pub frames: u64,
}

impl BandwidthLedger {
    pub fn record(&mut self, kind: MessageKind, payload_bytes: usize) {
        let payload = payload_bytes as u64;
        if kind.is_counted() {
            self.counted_bytes += payload;
        } else {
            self.control_bytes += payload;
        }
        self.control_bytes += HEADER_BYTES as u64;
        if kind == MessageKind::FeatureTransfer {
            self.inter_agent_links += 1;
        }
    }

    pub fn record_message(&mut self, m: &Message) {
        self.record(m.kind(), m.payload_bytes());
    }

    pub fn merge(&mut self, other: &BandwidthLedger) {
        self.counted_bytes += other.counted_bytes;
        self.control_bytes += other.control_bytes;
        self.inter_agent_links += other.inter_agent_links;
        self.frames += other.frames;
    }

    /// Rebuilds a ledger from trace records alone.
    pub fn from_trace(records: &[TraceRecord], frames: u64) -> Self {
        let mut l = BandwidthLedger {
            frames,
            ..Default::default()
        };
        for r in records {
            l.record(r.kind, r.payload_bytes);
        }
        l
    }
}

/// Megabytes of counted payload per frame.
pub fn mbpf(ledger: &BandwidthLedger) -> Result<f64> {
    if ledger.frames == 0 {
        return Err(Error::invalid("ledger has no frames"));
    }
    Ok(ledger.counted_bytes as f64 / ledger.frames as f64 / 1e6)
}

/// Feature transfers per agent per frame.
pub fn links_per_agent(ledger: &BandwidthLedger, n_agents: usize) -> Result<f64> {
    if ledger.frames == 0 {
        return Err(Error::invalid("ledger has no frames"));
    }
    if n_agents == 0 {
        return Err(Error::invalid("n_agents must be positive"));
    }
    Ok(ledger.inter_agent_links as f64 / ledger.frames as f64 / n_agents as f64)
}

/// One line of the message trace dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame: u64,
    pub kind: MessageKind,
    pub from: usize,
    pub to: usize,
    pub payload_bytes: usize,
    /// Header plus payload.
    pub bytes: usize,
}

impl TraceRecord {
    pub fn of(frame: u64, m: &Message) -> Self {
        Self {
            frame,
            kind: m.kind(),
            from: m.from(),
            to: m.to(),
            payload_bytes: m.payload_bytes(),
            bytes: m.wire_len(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_trace(mut w: impl Write, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(r: impl BufRead) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic_example() {
        // Q=4, F=32, N=5, one frame, two feature transfers.
        let mut l = BandwidthLedger {
            frames: 1,
            ..Default::default()
        };
        for _ in 0..20 {
            l.record(MessageKind::QueryBroadcast, 16);
            l.record(MessageKind::ScoreReply, 4);
        }
        for _ in 0..2 {
            l.record(MessageKind::FeatureRequest, 0);
            l.record(MessageKind::FeatureTransfer, 128);
        }
        assert_eq!(l.counted_bytes, 576);
        assert_eq!(l.control_bytes, 20 * 4 + 44 * 9);
        assert!((mbpf(&l).unwrap() - 5.76e-4).abs() < 1e-15);
        assert!((links_per_agent(&l, 5).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empty_frame_and_zero_frames() {
        let l = BandwidthLedger {
            frames: 1,
            ..Default::default()
        };
        assert_eq!(mbpf(&l).unwrap(), 0.0);
        assert!(mbpf(&BandwidthLedger::default()).is_err());
        assert!(links_per_agent(&BandwidthLedger::default(), 3).is_err());
    }

    #[test]
    fn large_feature_map() {
        // A 512×16×16 map of 4-byte reals is about half a megabyte per link.
        let mut l = BandwidthLedger {
            frames: 1,
            ..Default::default()
        };
        l.record(MessageKind::FeatureTransfer, 512 * 16 * 16 * 4);
        assert!((mbpf(&l).unwrap() - 0.524288).abs() < 1e-12);
    }

    #[test]
    fn trace_round_trip() {
        let recs = vec![TraceRecord {
            frame: 3,
            kind: MessageKind::ScoreReply,
            from: 1,
            to: 0,
            payload_bytes: 4,
            bytes: 13,
        }];
        let mut buf = Vec::new();
        write_trace(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"frame\":3,\"kind\":\"ScoreReply\",\"from\":1,\"to\":0,\"payload_bytes\":4,\"bytes\":13}\n"
        );
        assert_eq!(read_trace(buf.as_slice()).unwrap(), recs);
    }
}
