//! Communication-graph math: scaled general attention between queries and
//! keys, the row-stochastic matching matrix, δ-pruning, and weighted fusion.
//!
//! Everything here is pure. The same functions run centrally (training,
//! reference inference) and inside each simulated agent, which is what makes
//! the distributed and centralized results bit-identical.

use serde::{Deserialize, Serialize};

use crate::densemath::{dot, softmax_row, Matrix};
use crate::error::{Error, Result};

/// Compact query broadcast by a requester.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVec(pub Vec<f64>);

/// Key kept local by its owner.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyVec(pub Vec<f64>);

/// Encoded observation feature (a flattened feature map).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(pub Vec<f64>);

macro_rules! vec_newtype {
    ($t:ty) => {
        impl $t {
            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

vec_newtype!(QueryVec);
vec_newtype!(KeyVec);
vec_newtype!(FeatureVec);

/// The learnable `Q×K` matrix bridging query and key sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralAttentionParams {
    pub w_g: Matrix,
}

impl GeneralAttentionParams {
    pub fn new(w_g: Matrix) -> Self {
        Self { w_g }
    }

    pub fn query_dim(&self) -> usize {
        self.w_g.rows()
    }

    pub fn key_dim(&self) -> usize {
        self.w_g.cols()
    }
}

/// Row-softmaxed attention scores; row `i` is how requester `i` weighs
/// every agent, itself included.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix {
    pub m: Matrix,
}

/// Matching matrix after thresholding: the weighted adjacency matrix of the
/// directed communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedMatrix {
    pub m_bar: Matrix,
    pub delta: f64,
}

/// A directed inter-agent transmission: `supporter` sends its feature to
/// `requester`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub supporter: usize,
    pub requester: usize,
}

/// `μᵀ W_g κ / √K`.
pub fn attention_score(mu: &QueryVec, kappa: &KeyVec, w: &GeneralAttentionParams) -> Result<f64> {
    let (q, k) = w.w_g.shape();
    if mu.len() != q || kappa.len() != k {
        return Err(Error::shape(
            format!("query {} / key {}", mu.len(), kappa.len()),
            format!("W_g {q}x{k}"),
        ));
    }
    let bilinear: f64 = mu
        .as_slice()
        .iter()
        .enumerate()
        .map(|(a, &mu_a)| mu_a * dot(w.w_g.row(a), kappa.as_slice()))
        .sum();
    Ok(bilinear / (k as f64).sqrt())
}

/// Raw (pre-softmax) score matrix; entry `(i, j)` is `Φ(μ_i, κ_j)`.
pub fn raw_scores(queries: &[QueryVec], keys: &[KeyVec], w: &GeneralAttentionParams) -> Result<Matrix> {
    if queries.len() != keys.len() {
        return Err(Error::shape(
            format!("{} queries", queries.len()),
            format!("{} keys", keys.len()),
        ));
    }
    let n = queries.len();
    if n == 0 {
        return Err(Error::Empty("agent list"));
    }
    let mut s = Matrix::zeros(n, n);
    for (i, mu) in queries.iter().enumerate() {
        for (j, kappa) in keys.iter().enumerate() {
            s.set(i, j, attention_score(mu, kappa, w)?);
        }
    }
    Ok(s)
}

/// Row-wise softmax of the attention scores, diagonal included.
pub fn build_matching_matrix(
    queries: &[QueryVec],
    keys: &[KeyVec],
    w: &GeneralAttentionParams,
) -> Result<MatchingMatrix> {
    let scores = raw_scores(queries, keys, w)?;
    matching_from_scores(&scores)
}

pub fn matching_from_scores(scores: &Matrix) -> Result<MatchingMatrix> {
    let mut m = Matrix::zeros(scores.rows(), scores.cols());
    for i in 0..scores.rows() {
        m.row_mut(i).copy_from_slice(&softmax_row(scores.row(i))?);
    }
    Ok(MatchingMatrix { m })
}

/// Zeroes every entry strictly below `delta`; entries equal to `delta` stay.
/// Survivors are not renormalized.
pub fn prune(m: &MatchingMatrix, delta: f64) -> Result<PrunedMatrix> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta {delta} outside [0, 1]")));
    }
    Ok(PrunedMatrix {
        m_bar: prune_rows(&m.m, delta),
        delta,
    })
}

pub(crate) fn prune_rows(m: &Matrix, delta: f64) -> Matrix {
    let mut out = m.clone();
    for v in out.values_mut() {
        if *v < delta {
            *v = 0.0;
        }
    }
    out
}

/// Single-row form of [`prune`], used by agents that only hold their own row.
pub fn prune_row(row: &[f64], delta: f64) -> Vec<f64> {
    row.iter().map(|&v| if v < delta { 0.0 } else { v }).collect()
}

impl PrunedMatrix {
    /// Rescales each row's survivors to sum to one. Off by default; kept as
    /// an experiment toggle.
    pub fn renormalized(&self) -> PrunedMatrix {
        let mut m_bar = self.m_bar.clone();
        for i in 0..m_bar.rows() {
            let row = m_bar.row_mut(i);
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        PrunedMatrix {
            m_bar,
            delta: self.delta,
        }
    }
}

/// `Σ_j weights[j] · f_j`, skipping exactly-zero weights.
pub fn fuse(weights: &[f64], features: &[FeatureVec]) -> Result<FeatureVec> {
    if weights.len() != features.len() {
        return Err(Error::shape(
            format!("{} weights", weights.len()),
            format!("{} features", features.len()),
        ));
    }
    let dim = features.first().map(FeatureVec::len).ok_or(Error::Empty("features"))?;
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::shape(
            format!("feature length {dim}"),
            format!("feature length {}", bad.len()),
        ));
    }
    Ok(FeatureVec(fuse_iter(
        dim,
        weights.iter().copied().zip(features.iter().map(FeatureVec::as_slice)),
    )))
}

/// Accumulation kernel shared with the simulated agents; callers supply
/// `(weight, feature)` pairs in agent order.
pub(crate) fn fuse_iter<'a>(dim: usize, terms: impl Iterator<Item = (f64, &'a [f64])>) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for (w, f) in terms {
        if w == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(f) {
            *a += w * x;
        }
    }
    acc
}

/// Every nonzero off-diagonal entry `(i, j)` as a link `j → i`, in row-major order.
pub fn comm_links(m_bar: &PrunedMatrix) -> Vec<Link> {
    let m = &m_bar.m_bar;
    let mut links = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && m.get(i, j) != 0.0 {
                links.push(Link {
                    supporter: j,
                    requester: i,
                });
            }
        }
    }
    links
}
