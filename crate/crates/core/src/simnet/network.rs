use super::agent::AgentState;
use super::ledger::{BandwidthLedger, TraceRecord};
use super::message::Message;
use crate::commgraph::FeatureVec;
use crate::densemath::{Matrix, Rng};
use crate::error::{Error, Result};
use crate::neuralnet::{argmax, PipelineParams};
use crate::policy::Policy;

/// Hook applied to every message in flight. Returning `None` drops it.
pub type Interceptor<'a> = Box<dyn FnMut(Message) -> Option<Message> + 'a>;

/// Synchronous message-passing network for one frame.
///
/// Messages are delivered in rounds, in emission order. Every message is
/// recorded in the ledger and trace when sent, before any interception.
pub struct Network<'a> {
    theta: &'a PipelineParams,
    policy: Policy,
    delta: f64,
    frame: u64,
    agents: Vec<AgentState>,
    ledger: BandwidthLedger,
    trace: Vec<TraceRecord>,
    interceptor: Option<Interceptor<'a>>,
}

/// Everything one simulated frame produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub logits: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
    /// Full softmax rows, for policies that compute a self score.
    pub matching: Option<Matrix>,
    /// Weight rows each agent fused with.
    pub weights: Matrix,
    pub fused: Vec<FeatureVec>,
    pub ledger: BandwidthLedger,
    pub trace: Vec<TraceRecord>,
}

impl<'a> Network<'a> {
    pub fn new(theta: &'a PipelineParams, policy: Policy, delta: f64, observations: &[Vec<f64>]) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Empty("episode observations"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid(format!("delta {delta} outside [0, 1]")));
        }
        let obs_dim = theta.dims().obs_dim;
        if let Some(bad) = observations.iter().find(|o| o.len() != obs_dim) {
            return Err(Error::shape(
                format!("observation length {}", bad.len()),
                format!("obs_dim {obs_dim}"),
            ));
        }
        let n = observations.len();
        let agents = observations
            .iter()
            .enumerate()
            .map(|(i, o)| AgentState::new(i, n, o.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            theta,
            policy,
            delta,
            frame: 0,
            agents,
            ledger: BandwidthLedger::default(),
            trace: Vec::new(),
            interceptor: None,
        })
    }

    /// Frame index stamped on trace records.
    pub fn with_frame(mut self, frame: u64) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_interceptor(mut self, f: impl FnMut(Message) -> Option<Message> + 'a) -> Self {
        self.interceptor = Some(Box::new(f));
        self
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn ledger(&self) -> &BandwidthLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Local encoding, then query broadcast and score replies for policies
    /// that score their peers.
    pub fn handshake(&mut self) -> Result<()> {
        let attend = self.policy.uses_handshake();
        for a in &mut self.agents {
            a.compute_local(self.theta, attend)?;
        }
        if attend {
            let mut queries = Vec::new();
            for a in &self.agents {
                queries.extend(a.query_messages(self.theta)?);
            }
            let replies = self.deliver(queries)?;
            let none = self.deliver(replies)?;
            debug_assert!(none.is_empty());
        }
        Ok(())
    }

    /// Selection, feature requests and transfers, then fusion and decoding.
    /// Agents select in index order.
    pub fn transmit(&mut self, rng: &mut Rng) -> Result<()> {
        let mut requests = Vec::new();
        for a in &mut self.agents {
            requests.extend(a.select(self.policy, self.delta, rng, self.theta)?);
        }
        let transfers = self.deliver(requests)?;
        let none = self.deliver(transfers)?;
        debug_assert!(none.is_empty());
        for a in &mut self.agents {
            a.fuse_and_decode(self.theta)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<EpisodeOutcome> {
        let n = self.agents.len();
        self.ledger.frames += 1;
        let mut logits = Vec::with_capacity(n);
        let mut weights = Matrix::zeros(n, n);
        let mut matching = Some(Matrix::zeros(n, n));
        let mut fused = Vec::with_capacity(n);
        for (i, a) in self.agents.iter().enumerate() {
            let y = a
                .logits()
                .ok_or_else(|| Error::Protocol(format!("agent {i} produced no output")))?;
            logits.push(y.to_vec());
            fused.push(a.fused().expect("decoded").clone());
            weights.row_mut(i).copy_from_slice(a.weights().expect("selected before decoding"));
            match (a.matching_row(), matching.as_mut()) {
                (Some(r), Some(m)) => m.row_mut(i).copy_from_slice(r),
                _ => matching = None,
            }
        }
        Ok(EpisodeOutcome {
            predictions: logits.iter().map(|y| argmax(y)).collect(),
            logits,
            matching,
            weights,
            fused,
            ledger: self.ledger,
            trace: self.trace,
        })
    }

    /// Sends one round and returns the replies it triggered.
    fn deliver(&mut self, msgs: Vec<Message>) -> Result<Vec<Message>> {
        let mut replies = Vec::new();
        for m in msgs {
            self.ledger.record_message(&m);
            self.trace.push(TraceRecord::of(self.frame, &m));
            let m = match self.interceptor.as_mut() {
                Some(f) => match f(m) {
                    Some(m) => m,
                    None => continue,
                },
                None => m,
            };
            let to = m.to();
            let agent = self
                .agents
                .get_mut(to)
                .ok_or_else(|| Error::Protocol(format!("no agent {to}")))?;
            if let Some(r) = agent.receive(m, self.theta)? {
                replies.push(r);
            }
        }
        Ok(replies)
    }
}

/// Handshake only: returns the full matching rows.
pub fn run_handshake(theta: &PipelineParams, observations: &[Vec<f64>]) -> Result<(Matrix, Vec<TraceRecord>)> {
    let mut net = Network::new(theta, Policy::FullyConnected, 0.0, observations)?;
    net.handshake()?;
    let n = observations.len();
    let mut rows = Matrix::zeros(n, n);
    let mut rng = Rng::new(0);
    for (i, a) in net.agents.iter_mut().enumerate() {
        a.select(Policy::FullyConnected, 0.0, &mut rng, theta)?;
        rows.row_mut(i)
            .copy_from_slice(a.matching_row().expect("fully connected computes rows"));
    }
    Ok((rows, net.trace))
}

/// One full frame under `policy`.
pub fn run_episode(
    theta: &PipelineParams,
    observations: &[Vec<f64>],
    policy: Policy,
    delta: f64,
    rng: &mut Rng,
) -> Result<EpisodeOutcome> {
    let mut net = Network::new(theta, policy, delta, observations)?;
    net.handshake()?;
    net.transmit(rng)?;
    net.finish()
}
