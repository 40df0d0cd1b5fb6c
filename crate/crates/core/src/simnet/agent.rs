use super::message::{Message, MessageKind};
use crate::commgraph::{attention_score, fuse_iter, prune_row, FeatureVec, KeyVec, QueryVec};
use crate::densemath::{softmax_row, Rng};
use crate::error::{Error, Result};
use crate::neuralnet::pipeline::{best_peer, decoder_input, PipelineParams};
use crate::neuralnet::{mlp_forward, random_peer};
use crate::policy::Policy;

/// One simulated agent. It sees only its own observation, the shared model
/// weights, and the messages addressed to it.
#[derive(Debug, Clone)]
pub struct AgentState {
    id: usize,
    n_agents: usize,
    observation: Vec<f64>,
    query: Option<QueryVec>,
    key: Option<KeyVec>,
    feature: Option<FeatureVec>,
    /// `scores[j]` = own query against agent `j`'s key.
    scores: Vec<Option<f64>>,
    matching_row: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    requested: Vec<bool>,
    received: Vec<Option<FeatureVec>>,
    fused: Option<FeatureVec>,
    logits: Option<Vec<f64>>,
}

impl AgentState {
    pub fn new(id: usize, n_agents: usize, observation: Vec<f64>) -> Result<Self> {
        if id >= n_agents {
            return Err(Error::invalid(format!("agent id {id} with {n_agents} agents")));
        }
        Ok(Self {
            id,
            n_agents,
            observation,
            query: None,
            key: None,
            feature: None,
            scores: vec![None; n_agents],
            matching_row: None,
            weights: None,
            requested: vec![false; n_agents],
            received: vec![None; n_agents],
            fused: None,
            logits: None,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn feature(&self) -> Option<&FeatureVec> {
        self.feature.as_ref()
    }

    /// Softmax over own scores including the self score; only for policies
    /// that compute one.
    pub fn matching_row(&self) -> Option<&[f64]> {
        self.matching_row.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn fused(&self) -> Option<&FeatureVec> {
        self.fused.as_ref()
    }

    pub fn logits(&self) -> Option<&[f64]> {
        self.logits.as_deref()
    }

    /// Encodes the observation; with `attend` also the query, key and self score.
    pub fn compute_local(&mut self, theta: &PipelineParams, attend: bool) -> Result<()> {
        let (f, _) = mlp_forward(&theta.theta_e, &self.observation)?;
        self.feature = Some(FeatureVec(f));
        if attend {
            let (mu, _) = mlp_forward(&theta.theta_q, &self.observation)?;
            let (kappa, _) = mlp_forward(&theta.theta_k, &self.observation)?;
            let (mu, kappa) = (QueryVec(mu), KeyVec(kappa));
            self.scores[self.id] = Some(attention_score(&mu, &kappa, &theta.w_g)?);
            self.query = Some(mu);
            self.key = Some(kappa);
        }
        Ok(())
    }

    /// One query copy per peer.
    pub fn query_messages(&self, theta: &PipelineParams) -> Result<Vec<Message>> {
        let mu = self
            .query
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("agent {} has no query", self.id)))?;
        let d = theta.dims();
        self.peers()
            .map(|j| Message::new(MessageKind::QueryBroadcast, self.id, j, mu.0.clone(), d.query_dim, d.feature_dim))
            .collect()
    }

    /// Handles one inbound message, possibly producing a reply.
    pub fn receive(&mut self, msg: Message, theta: &PipelineParams) -> Result<Option<Message>> {
        if msg.to() != self.id {
            return Err(Error::Protocol(format!("agent {} got a message for {}", self.id, msg.to())));
        }
        if msg.from() >= self.n_agents {
            return Err(Error::Protocol(format!("unknown sender {}", msg.from())));
        }
        let d = theta.dims();
        match msg.kind() {
            MessageKind::QueryBroadcast => {
                let key = self
                    .key
                    .as_ref()
                    .ok_or_else(|| Error::Protocol(format!("agent {} has no key", self.id)))?;
                let s = attention_score(&QueryVec(msg.payload().to_vec()), key, &theta.w_g)?;
                Message::new(MessageKind::ScoreReply, self.id, msg.from(), vec![s], d.query_dim, d.feature_dim).map(Some)
            }
            MessageKind::ScoreReply => {
                self.scores[msg.from()] = Some(msg.payload()[0]);
                Ok(None)
            }
            MessageKind::FeatureRequest => {
                let f = self
                    .feature
                    .as_ref()
                    .ok_or_else(|| Error::Protocol(format!("agent {} has no feature", self.id)))?;
                Message::new(MessageKind::FeatureTransfer, self.id, msg.from(), f.0.clone(), d.query_dim, d.feature_dim)
                    .map(Some)
            }
            MessageKind::FeatureTransfer => {
                if !self.requested[msg.from()] {
                    return Err(Error::Protocol(format!(
                        "agent {} got an unrequested feature from {}",
                        self.id,
                        msg.from()
                    )));
                }
                self.received[msg.from()] = Some(FeatureVec(msg.payload().to_vec()));
                Ok(None)
            }
        }
    }

    /// Fixes this agent's fusion weights and returns its feature requests.
    /// RandCom draws one peer from `rng`; no other policy touches it.
    pub fn select(&mut self, policy: Policy, delta: f64, rng: &mut Rng, theta: &PipelineParams) -> Result<Vec<Message>> {
        let n = self.n_agents;
        let i = self.id;
        let mut weights = vec![0.0; n];
        match policy {
            Policy::When2com | Policy::FullyConnected => {
                let row = softmax_row(&self.score_row(true)?)?;
                weights = if policy == Policy::When2com {
                    prune_row(&row, delta)
                } else {
                    row.clone()
                };
                self.matching_row = Some(row);
            }
            Policy::ForcedTop1 => {
                let scores = self.score_row(false)?;
                weights[best_peer(&scores, i).unwrap_or(i)] = 1.0;
            }
            Policy::NoCom => weights[i] = 1.0,
            Policy::CatAll => weights.fill(1.0 / n as f64),
            Policy::RandCom => weights[random_peer(n, i, rng)] = 1.0,
        }
        // Fully connected and cat-all transmit to every peer by construction.
        let broadcast = matches!(policy, Policy::FullyConnected | Policy::CatAll);
        let d = theta.dims();
        let requests = self
            .peers()
            .filter(|&j| broadcast || weights[j] != 0.0)
            .map(|j| Message::new(MessageKind::FeatureRequest, i, j, vec![], d.query_dim, d.feature_dim))
            .collect::<Result<Vec<_>>>()?;
        for m in &requests {
            self.requested[m.to()] = true;
        }
        self.weights = Some(weights);
        Ok(requests)
    }

    /// Fuses received features in agent order and decodes.
    pub fn fuse_and_decode(&mut self, theta: &PipelineParams) -> Result<Vec<f64>> {
        let weights = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("agent {} fused before selecting", self.id)))?;
        let own = self
            .feature
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("agent {} has no feature", self.id)))?;
        let mut terms = Vec::with_capacity(self.n_agents);
        for (j, &w) in weights.iter().enumerate() {
            let f: &[f64] = if j == self.id {
                own.as_slice()
            } else if w == 0.0 {
                // Skipped by the kernel; may be absent.
                &[]
            } else {
                self.received[j]
                    .as_ref()
                    .ok_or_else(|| Error::Protocol(format!("agent {} missing feature from {j}", self.id)))?
                    .as_slice()
            };
            terms.push((w, f));
        }
        let fused = FeatureVec(fuse_iter(own.len(), terms.into_iter()));
        let (y, _) = mlp_forward(&theta.theta_d, &decoder_input(own, &fused))?;
        self.fused = Some(fused);
        self.logits = Some(y.clone());
        Ok(y)
    }

    fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_agents).filter(move |&j| j != self.id)
    }

    /// Score row in agent order. Without `with_self` the diagonal is a
    /// placeholder that callers must skip.
    fn score_row(&self, with_self: bool) -> Result<Vec<f64>> {
        (0..self.n_agents)
            .map(|j| {
                if j == self.id && !with_self {
                    return Ok(0.0);
                }
                self.scores[j].ok_or_else(|| Error::Protocol(format!("agent {} missing score from {j}", self.id)))
            })
            .collect()
    }
}
