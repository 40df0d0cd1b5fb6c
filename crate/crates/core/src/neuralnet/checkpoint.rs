//! Flat binary checkpoint.
//!
//! Layout, all integers little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"W2CCKPT\0"
//! 8       4     version (1)
//! 12      4     obs_dim
//! 16      4     query_dim
//! 20      4     key_dim
//! 24      4     feature_dim
//! 28      4     n_classes
//! 32      4     hidden
//! 36      4     training policy code
//! 40      ...   parameter tensors in declaration order:
//!               θ_q, θ_k, θ_e, θ_d (per layer: weight row-major, then bias), W_g
//! ```
//!
//! Every network is two layers, so the dimension tuple fixes every tensor
//! length and the file carries no per-tensor framing.

use std::io::{Read, Write};

use super::pipeline::{PipelineDims, PipelineParams};
use crate::densemath::Rng;
use crate::error::{Error, Result};
use crate::policy::Policy;

pub const MAGIC: &[u8; 8] = b"W2CCKPT\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

/// Parameters plus the policy they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PipelineParams,
    pub policy: Policy,
}

pub fn encode(params: &PipelineParams, policy: Policy) -> Vec<u8> {
    let d = params.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        d.obs_dim as u32,
        d.query_dim as u32,
        d.key_dim as u32,
        d.feature_dim as u32,
        d.n_classes as u32,
        d.hidden as u32,
        policy.code(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"));
    if word(0) != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", word(0))));
    }
    let dims = PipelineDims {
        obs_dim: word(1) as usize,
        query_dim: word(2) as usize,
        key_dim: word(3) as usize,
        feature_dim: word(4) as usize,
        n_classes: word(5) as usize,
        hidden: word(6) as usize,
    };
    dims.validate()?;
    let policy = Policy::from_code(word(7)).ok_or_else(|| Error::Checkpoint(format!("unknown policy {}", word(7))))?;

    // The generator only shapes the tensors; every value is overwritten.
    let mut params = PipelineParams::init(dims, &mut Rng::new(0))?;
    let expected = HEADER_LEN + 8 * params.num_params();
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} bytes for {dims:?}, found {}",
            bytes.len()
        )));
    }
    let mut chunks = bytes[HEADER_LEN..].chunks_exact(8);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let c = chunks.next().expect("length checked");
            *v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::Checkpoint("non-finite parameter".into()));
            }
        }
    }
    Ok(Checkpoint { params, policy })
}

pub fn write_checkpoint(mut w: impl Write, params: &PipelineParams, policy: Policy) -> Result<()> {
    w.write_all(&encode(params, policy))?;
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let params = PipelineParams::init(PipelineDims::default(), &mut Rng::new(9)).unwrap();
        let bytes = encode(&params, Policy::ForcedTop1);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * params.num_params());
        let back = decode(&bytes).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.policy, Policy::ForcedTop1);
    }

    #[test]
    fn header_layout() {
        let params = PipelineParams::init(PipelineDims::default(), &mut Rng::new(9)).unwrap();
        let bytes = encode(&params, Policy::When2com);
        assert_eq!(&bytes[..8], b"W2CCKPT\0");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &32u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &4u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &16u32.to_le_bytes());
        // First tensor value is θ_q's first weight.
        let first = f64::from_le_bytes(bytes[40..48].try_into().unwrap());
        assert_eq!(first, params.theta_q.layers[0].weight.values()[0]);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let params = PipelineParams::init(PipelineDims::default(), &mut Rng::new(9)).unwrap();
        let bytes = encode(&params, Policy::When2com);
        assert!(decode(&bytes[..20]).is_err());
        assert!(decode(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes;
        bad[36] = 99;
        assert!(decode(&bad).is_err());
    }
}
