//! Per-episode forward and backward passes of the full pipeline.
//!
//! For each agent: query `μ = G_q(x)`, key `κ = G_k(x)`, feature `f = E(x)`.
//! Scores `s_ij = μ_iᵀ W_g κ_j / √K` are row-softmaxed into weights, the
//! weights fuse the features, and the decoder reads `[f_i; fused_i]`.
//! Training fuses with the soft weights; inference prunes them first. The
//! baselines swap the weight rows for fixed ones.

use serde::{Deserialize, Serialize};

use super::mlp::{mlp_backward, mlp_forward, MlpCache, MlpParams};
use crate::commgraph::{
    attention_score, fuse_iter, matching_from_scores, prune_rows, FeatureVec, GeneralAttentionParams, KeyVec,
    MatchingMatrix, PrunedMatrix, QueryVec,
};
use crate::densemath::{dot, log_softmax_row, softmax_row, Matrix, Rng};
use crate::error::{Error, Result};

/// Dimensions of every learnable component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineDims {
    pub obs_dim: usize,
    pub query_dim: usize,
    pub key_dim: usize,
    pub feature_dim: usize,
    pub n_classes: usize,
    pub hidden: usize,
}

impl Default for PipelineDims {
    fn default() -> Self {
        Self {
            obs_dim: 32,
            query_dim: 4,
            key_dim: 16,
            feature_dim: 32,
            n_classes: 10,
            hidden: 64,
        }
    }
}

impl PipelineDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.obs_dim,
            self.query_dim,
            self.key_dim,
            self.feature_dim,
            self.n_classes,
            self.hidden,
        ];
        if all.contains(&0) {
            return Err(Error::invalid(format!("all pipeline dims must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// All learnable parameters: query/key generators, encoder, decoder and `W_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub theta_q: MlpParams,
    pub theta_k: MlpParams,
    pub theta_e: MlpParams,
    pub theta_d: MlpParams,
    pub w_g: GeneralAttentionParams,
}

/// Gradients share the parameter layout.
pub type Gradients = PipelineParams;

impl PipelineParams {
    /// Two-layer perceptrons throughout; `W_g` entries have variance `1/√(QK)`.
    pub fn init(dims: PipelineDims, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        let h = dims.hidden;
        let theta_q = MlpParams::init(&[dims.obs_dim, h, dims.query_dim], rng);
        let theta_k = MlpParams::init(&[dims.obs_dim, h, dims.key_dim], rng);
        let theta_e = MlpParams::init(&[dims.obs_dim, h, dims.feature_dim], rng);
        let theta_d = MlpParams::init(&[2 * dims.feature_dim, h, dims.n_classes], rng);
        let qk = (dims.query_dim * dims.key_dim) as f64;
        let std = qk.powf(-0.25);
        let values = (0..dims.query_dim * dims.key_dim).map(|_| std * rng.normal()).collect();
        let w_g = GeneralAttentionParams::new(Matrix::new(dims.query_dim, dims.key_dim, values)?);
        Ok(Self {
            theta_q,
            theta_k,
            theta_e,
            theta_d,
            w_g,
        })
    }

    pub fn dims(&self) -> PipelineDims {
        PipelineDims {
            obs_dim: self.theta_e.in_dim(),
            query_dim: self.w_g.query_dim(),
            key_dim: self.w_g.key_dim(),
            feature_dim: self.theta_e.out_dim(),
            n_classes: self.theta_d.out_dim(),
            hidden: self.theta_e.layers[0].out_dim(),
        }
    }

    /// Checks that the four networks and `W_g` chain together.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let checks = [
            (self.theta_q.in_dim(), d.obs_dim, "G_q input"),
            (self.theta_k.in_dim(), d.obs_dim, "G_k input"),
            (self.theta_q.out_dim(), d.query_dim, "G_q output vs W_g rows"),
            (self.theta_k.out_dim(), d.key_dim, "G_k output vs W_g cols"),
            (self.theta_d.in_dim(), 2 * d.feature_dim, "decoder input vs 2F"),
        ];
        for (got, want, what) in checks {
            if got != want {
                return Err(Error::shape(format!("{what}: {got}"), format!("{want}")));
            }
        }
        for net in [&self.theta_q, &self.theta_k, &self.theta_e, &self.theta_d] {
            for pair in net.layers.windows(2) {
                if pair[0].out_dim() != pair[1].in_dim() {
                    return Err(Error::shape(
                        format!("layer out {}", pair[0].out_dim()),
                        format!("next layer in {}", pair[1].in_dim()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            theta_q: self.theta_q.zeros_like(),
            theta_k: self.theta_k.zeros_like(),
            theta_e: self.theta_e.zeros_like(),
            theta_d: self.theta_d.zeros_like(),
            w_g: GeneralAttentionParams::new(Matrix::zeros(self.w_g.query_dim(), self.w_g.key_dim())),
        }
    }

    /// Every parameter tensor in declaration order: `θ_q`, `θ_k`, `θ_e`,
    /// `θ_d` (each layer's weight then bias), then `W_g`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(self.theta_q.tensors());
        out.extend(self.theta_k.tensors());
        out.extend(self.theta_e.tensors());
        out.extend(self.theta_d.tensors());
        out.push(self.w_g.w_g.values());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.theta_q.tensors_mut());
        out.extend(self.theta_k.tensors_mut());
        out.extend(self.theta_e.tensors_mut());
        out.extend(self.theta_d.tensors_mut());
        out.push(self.w_g.w_g.values_mut());
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Euclidean norm over all entries; handy for gradients.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &PipelineParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Training uses soft matching rows; inference prunes at `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Training,
    Inference { delta: f64 },
}

/// How each agent's fusion weights are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    /// Row-softmax of the attention scores. With `exclude_self` the diagonal
    /// gets weight zero and the softmax runs over peers only.
    Soft { exclude_self: bool },
    /// Soft rows thresholded at `delta`, not renormalized.
    Pruned { delta: f64 },
    /// One-hot on the best-scoring peer.
    Top1,
    /// Caller-supplied `N×N` weight rows; no attention is computed.
    Fixed(Matrix),
}

impl Fusion {
    fn uses_attention(&self) -> bool {
        !matches!(self, Fusion::Fixed(_))
    }

    fn differentiable(&self) -> bool {
        matches!(self, Fusion::Soft { .. } | Fusion::Fixed(_))
    }
}

struct AgentCache {
    q: Option<MlpCache>,
    k: Option<MlpCache>,
    e: MlpCache,
    d: MlpCache,
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardCache {
    fusion: Fusion,
    agents: Vec<AgentCache>,
    queries: Vec<QueryVec>,
    keys: Vec<KeyVec>,
    features: Vec<FeatureVec>,
    weights: Matrix,
    logits: Vec<Vec<f64>>,
    dims: PipelineDims,
}

impl ForwardCache {
    pub fn features(&self) -> &[FeatureVec] {
        &self.features
    }

    pub fn queries(&self) -> &[QueryVec] {
        &self.queries
    }

    pub fn keys(&self) -> &[KeyVec] {
        &self.keys
    }
}

/// Result of one forward pass over an episode.
pub struct ForwardOutput {
    pub logits: Vec<Vec<f64>>,
    /// Raw attention scores, when the fusion rule computes them.
    pub scores: Option<Matrix>,
    /// Row-softmaxed scores (diagonal included), when attention is computed.
    pub matching: Option<MatchingMatrix>,
    /// Present only for [`Fusion::Pruned`].
    pub pruned: Option<PrunedMatrix>,
    /// The weight rows actually used for fusion.
    pub weights: Matrix,
    pub fused: Vec<FeatureVec>,
    pub cache: ForwardCache,
}

/// Forward pass of the learned model in training or inference mode.
pub fn pipeline_forward(theta: &PipelineParams, observations: &[Vec<f64>], mode: Mode) -> Result<ForwardOutput> {
    let fusion = match mode {
        Mode::Training => Fusion::Soft { exclude_self: false },
        Mode::Inference { delta } => Fusion::Pruned { delta },
    };
    forward_with(theta, observations, &fusion)
}

/// Forward pass under an arbitrary fusion rule.
pub fn forward_with(theta: &PipelineParams, observations: &[Vec<f64>], fusion: &Fusion) -> Result<ForwardOutput> {
    let n = observations.len();
    if n == 0 {
        return Err(Error::Empty("episode observations"));
    }
    let dims = theta.dims();
    if let Some(bad) = observations.iter().find(|o| o.len() != dims.obs_dim) {
        return Err(Error::shape(
            format!("observation length {}", bad.len()),
            format!("obs_dim {}", dims.obs_dim),
        ));
    }
    if let Fusion::Pruned { delta } = fusion {
        if !(0.0..=1.0).contains(delta) {
            return Err(Error::invalid(format!("delta {delta} outside [0, 1]")));
        }
    }
    if let Fusion::Fixed(w) = fusion {
        if w.shape() != (n, n) {
            return Err(Error::shape(format!("fixed weights {:?}", w.shape()), format!("{n}x{n}")));
        }
    }

    let attend = fusion.uses_attention();
    let mut agents = Vec::with_capacity(n);
    let mut queries = Vec::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for x in observations {
        let (f, e_cache) = mlp_forward(&theta.theta_e, x)?;
        features.push(FeatureVec(f));
        let (q_cache, k_cache) = if attend {
            let (mu, qc) = mlp_forward(&theta.theta_q, x)?;
            let (kappa, kc) = mlp_forward(&theta.theta_k, x)?;
            queries.push(QueryVec(mu));
            keys.push(KeyVec(kappa));
            (Some(qc), Some(kc))
        } else {
            (None, None)
        };
        agents.push((q_cache, k_cache, e_cache));
    }

    let (scores, matching) = if attend {
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, attention_score(&queries[i], &keys[j], &theta.w_g)?);
            }
        }
        let m = matching_from_scores(&s)?;
        (Some(s), Some(m))
    } else {
        (None, None)
    };

    let mut pruned = None;
    let weights = match fusion {
        Fusion::Soft { exclude_self: false } => matching.as_ref().expect("attention computed").m.clone(),
        Fusion::Soft { exclude_self: true } => peer_softmax(scores.as_ref().expect("attention computed"))?,
        Fusion::Pruned { delta } => {
            let m_bar = prune_rows(&matching.as_ref().expect("attention computed").m, *delta);
            pruned = Some(PrunedMatrix {
                m_bar: m_bar.clone(),
                delta: *delta,
            });
            m_bar
        }
        Fusion::Top1 => top1_rows(scores.as_ref().expect("attention computed")),
        Fusion::Fixed(w) => w.clone(),
    };

    let fdim = dims.feature_dim;
    let mut fused = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    for (i, (q, k, e)) in agents.into_iter().enumerate() {
        let row = weights.row(i);
        let fi = FeatureVec(fuse_iter(
            fdim,
            row.iter().copied().zip(features.iter().map(FeatureVec::as_slice)),
        ));
        let (y, d) = mlp_forward(&theta.theta_d, &decoder_input(&features[i], &fi))?;
        fused.push(fi);
        logits.push(y);
        caches.push(AgentCache { q, k, e, d });
    }

    Ok(ForwardOutput {
        logits: logits.clone(),
        scores,
        matching,
        pruned,
        weights: weights.clone(),
        fused,
        cache: ForwardCache {
            fusion: fusion.clone(),
            agents: caches,
            queries,
            keys,
            features,
            weights,
            logits,
            dims,
        },
    })
}

/// `[f_i; fused_i]`.
pub fn decoder_input(own: &FeatureVec, fused: &FeatureVec) -> Vec<f64> {
    let mut z = Vec::with_capacity(own.len() + fused.len());
    z.extend_from_slice(own.as_slice());
    z.extend_from_slice(fused.as_slice());
    z
}

/// Softmax over off-diagonal scores; a lone agent keeps weight 1 on itself.
pub fn peer_softmax(scores: &Matrix) -> Result<Matrix> {
    let n = scores.rows();
    if n == 1 {
        return Ok(Matrix::identity(1));
    }
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let peers: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| scores.get(i, j)).collect();
        let p = softmax_row(&peers)?;
        for (j, v) in (0..n).filter(|&j| j != i).zip(p) {
            w.set(i, j, v);
        }
    }
    Ok(w)
}

/// Index of the highest-scoring peer of `i` (lowest index on ties).
pub fn best_peer(scores: &[f64], i: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &s) in scores.iter().enumerate() {
        if j == i {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(j);
        }
    }
    best
}

fn top1_rows(scores: &Matrix) -> Matrix {
    let n = scores.rows();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let j = best_peer(scores.row(i), i).unwrap_or(i);
        w.set(i, j, 1.0);
    }
    w
}

/// Mean over agents of `-log softmax(logits_i)[label_i]`.
pub fn cross_entropy_loss(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(Error::shape(
            format!("{} logit rows", logits.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if logits.is_empty() {
        return Err(Error::Empty("logits"));
    }
    let mut total = 0.0;
    for (row, &y) in logits.iter().zip(labels) {
        if y >= row.len() {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: row.len(),
            });
        }
        total -= log_softmax_row(row)?[y];
    }
    Ok(total / labels.len() as f64)
}

/// Exact gradient of [`cross_entropy_loss`] over a training-path forward
/// pass, with respect to every parameter.
pub fn pipeline_backward(cache: &ForwardCache, theta: &PipelineParams, labels: &[usize]) -> Result<Gradients> {
    let mut grads = theta.zeros_like();
    accumulate_backward(cache, theta, labels, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `scale ·` the episode gradient into `grads`.
pub fn accumulate_backward(
    cache: &ForwardCache,
    theta: &PipelineParams,
    labels: &[usize],
    scale: f64,
    grads: &mut Gradients,
) -> Result<()> {
    if !cache.fusion.differentiable() {
        return Err(Error::invalid(
            "backward is defined only for soft or fixed fusion (the training path)",
        ));
    }
    if theta.dims() != cache.dims || grads.dims() != cache.dims {
        return Err(Error::shape(format!("{:?}", theta.dims()), format!("cache {:?}", cache.dims)));
    }
    let n = cache.agents.len();
    if labels.len() != n {
        return Err(Error::shape(format!("{n} agents"), format!("{} labels", labels.len())));
    }
    let fdim = cache.dims.feature_dim;

    // Decoder: dL/dlogits = (softmax - onehot) / N.
    let mut d_feat = vec![vec![0.0; fdim]; n];
    let mut d_fused = Vec::with_capacity(n);
    for i in 0..n {
        let y = labels[i];
        if y >= cache.dims.n_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: cache.dims.n_classes,
            });
        }
        let mut dl = softmax_row(&cache.logits[i])?;
        dl[y] -= 1.0;
        dl.iter_mut().for_each(|v| *v *= scale / n as f64);
        let dz = mlp_backward(&theta.theta_d, &cache.agents[i].d, &dl, &mut grads.theta_d);
        for (a, b) in d_feat[i].iter_mut().zip(&dz[..fdim]) {
            *a += b;
        }
        d_fused.push(dz[fdim..].to_vec());
    }

    // Fusion: fused_i = Σ_j w_ij f_j.
    let w = &cache.weights;
    let mut d_weights = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            d_weights.set(i, j, dot(&d_fused[i], cache.features[j].as_slice()));
            let wij = w.get(i, j);
            if wij != 0.0 {
                for (a, b) in d_feat[j].iter_mut().zip(&d_fused[i]) {
                    *a += wij * b;
                }
            }
        }
    }

    // Softmax rows and the bilinear scores.
    if let Fusion::Soft { .. } = cache.fusion {
        let sqrt_k = (cache.dims.key_dim as f64).sqrt();
        let wg = &theta.w_g.w_g;
        let w_kappa: Vec<Vec<f64>> = cache
            .keys
            .iter()
            .map(|k| wg.matvec(k.as_slice()))
            .collect::<Result<_>>()?;
        let wt_mu: Vec<Vec<f64>> = cache
            .queries
            .iter()
            .map(|q| wg.matvec_transposed(q.as_slice()))
            .collect::<Result<_>>()?;
        let mut d_mu = vec![vec![0.0; cache.dims.query_dim]; n];
        let mut d_kappa = vec![vec![0.0; cache.dims.key_dim]; n];
        for i in 0..n {
            let row_dot: f64 = (0..n).map(|k| w.get(i, k) * d_weights.get(i, k)).sum();
            for j in 0..n {
                let ds = w.get(i, j) * (d_weights.get(i, j) - row_dot) / sqrt_k;
                if ds == 0.0 {
                    continue;
                }
                for (a, b) in d_mu[i].iter_mut().zip(&w_kappa[j]) {
                    *a += ds * b;
                }
                for (a, b) in d_kappa[j].iter_mut().zip(&wt_mu[i]) {
                    *a += ds * b;
                }
                let mu = cache.queries[i].as_slice();
                let kappa = cache.keys[j].as_slice();
                let gw = grads.w_g.w_g.values_mut();
                for (a, &mu_a) in mu.iter().enumerate() {
                    let row = &mut gw[a * kappa.len()..(a + 1) * kappa.len()];
                    for (g, &kb) in row.iter_mut().zip(kappa) {
                        *g += ds * mu_a * kb;
                    }
                }
            }
        }
        for i in 0..n {
            let agent = &cache.agents[i];
            let qc = agent.q.as_ref().expect("soft fusion caches queries");
            let kc = agent.k.as_ref().expect("soft fusion caches keys");
            mlp_backward(&theta.theta_q, qc, &d_mu[i], &mut grads.theta_q);
            mlp_backward(&theta.theta_k, kc, &d_kappa[i], &mut grads.theta_k);
        }
    }

    for i in 0..n {
        mlp_backward(&theta.theta_e, &cache.agents[i].e, &d_feat[i], &mut grads.theta_e);
    }
    Ok(())
}
