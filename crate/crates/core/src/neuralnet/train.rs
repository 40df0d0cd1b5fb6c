use std::io::Write;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::pipeline::{accumulate_backward, cross_entropy_loss, forward_with, Fusion, PipelineDims, PipelineParams};
use crate::densemath::{Matrix, Rng};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::scenarios::{Dataset, Episode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dims: PipelineDims,
    pub policy: Policy,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Validation metrics are recorded every `eval_every` steps (0 disables).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dims: PipelineDims::default(),
            policy: Policy::When2com,
            steps: 5000,
            batch_size: 8,
            adam: AdamConfig::default(),
            eval_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean minibatch loss per step.
    pub losses: Vec<f64>,
    pub evals: Vec<EvalRecord>,
}

impl TrainLog {
    /// `step,loss` rows followed by a blank line and `step,val_loss,val_accuracy` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,loss")?;
        for (i, l) in self.losses.iter().enumerate() {
            writeln!(w, "{},{l:?}", i + 1)?;
        }
        writeln!(w)?;
        writeln!(w, "step,val_loss,val_accuracy")?;
        for e in &self.evals {
            writeln!(w, "{},{:?},{:?}", e.step, e.val_loss, e.val_accuracy)?;
        }
        Ok(())
    }
}

/// Fusion rule a policy trains with. Only RandCom consumes randomness.
pub fn training_fusion(policy: Policy, n: usize, rng: &mut Rng) -> Fusion {
    match policy {
        Policy::When2com | Policy::FullyConnected => Fusion::Soft { exclude_self: false },
        Policy::ForcedTop1 => Fusion::Soft { exclude_self: true },
        Policy::NoCom => Fusion::Fixed(Matrix::identity(n)),
        Policy::CatAll => Fusion::Fixed(uniform_rows(n)),
        Policy::RandCom => Fusion::Fixed(random_peer_rows(n, rng)),
    }
}

/// Fusion rule a policy evaluates with. Only RandCom consumes randomness.
pub fn inference_fusion(policy: Policy, n: usize, delta: f64, rng: &mut Rng) -> Fusion {
    match policy {
        Policy::When2com => Fusion::Pruned { delta },
        Policy::FullyConnected => Fusion::Soft { exclude_self: false },
        Policy::ForcedTop1 => Fusion::Top1,
        Policy::NoCom => Fusion::Fixed(Matrix::identity(n)),
        Policy::CatAll => Fusion::Fixed(uniform_rows(n)),
        Policy::RandCom => Fusion::Fixed(random_peer_rows(n, rng)),
    }
}

pub fn uniform_rows(n: usize) -> Matrix {
    Matrix::new(n, n, vec![1.0 / n as f64; n * n]).expect("n > 0")
}

/// One-hot rows on a uniformly random peer; a lone agent keeps itself.
pub fn random_peer_rows(n: usize, rng: &mut Rng) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        w.set(i, random_peer(n, i, rng), 1.0);
    }
    w
}

pub fn random_peer(n: usize, i: usize, rng: &mut Rng) -> usize {
    if n == 1 {
        return i;
    }
    let j = rng.below(n - 1);
    if j >= i {
        j + 1
    } else {
        j
    }
}

/// Mean loss and gradient over a minibatch of episodes.
pub fn batch_loss_and_grad(
    theta: &PipelineParams,
    batch: &[&Episode],
    policy: Policy,
    rng: &mut Rng,
) -> Result<(f64, PipelineParams)> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let mut grads = theta.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for ep in batch {
        let fusion = training_fusion(policy, ep.n_agents(), rng);
        let out = forward_with(theta, &ep.observations, &fusion)?;
        loss += scale * cross_entropy_loss(&out.logits, &ep.labels)?;
        accumulate_backward(&out.cache, theta, &ep.labels, scale, &mut grads)?;
    }
    Ok((loss, grads))
}

fn validation(theta: &PipelineParams, episodes: &[Episode], policy: Policy) -> Result<(f64, f64)> {
    // Fixed stream so RandCom validation numbers are comparable across steps.
    let mut rng = Rng::new(0x5eed_0f_7a11);
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for ep in episodes {
        let fusion = training_fusion(policy, ep.n_agents(), &mut rng);
        let out = forward_with(theta, &ep.observations, &fusion)?;
        loss += cross_entropy_loss(&out.logits, &ep.labels)?;
        for (row, &y) in out.logits.iter().zip(&ep.labels) {
            correct += usize::from(argmax(row) == y);
            total += 1;
        }
    }
    Ok((loss / episodes.len() as f64, correct as f64 / total as f64))
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Initializes parameters from `rng` and runs minibatch Adam on the
/// training split. Batches are drawn with replacement from the same stream,
/// so a fixed seed gives a bit-reproducible run.
pub fn train(config: &TrainConfig, dataset: &Dataset, rng: &mut Rng) -> Result<(PipelineParams, TrainLog)> {
    let theta = PipelineParams::init(config.dims, rng)?;
    train_from(theta, config, dataset, rng)
}

/// Like [`train`] but starting from given parameters.
pub fn train_from(
    mut theta: PipelineParams,
    config: &TrainConfig,
    dataset: &Dataset,
    rng: &mut Rng,
) -> Result<(PipelineParams, TrainLog)> {
    if dataset.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let wc = &dataset.world.config;
    if wc.obs_dim != config.dims.obs_dim || wc.n_classes != config.dims.n_classes {
        return Err(Error::shape(
            format!("world obs_dim {} / classes {}", wc.obs_dim, wc.n_classes),
            format!("model obs_dim {} / classes {}", config.dims.obs_dim, config.dims.n_classes),
        ));
    }
    let mut state = AdamState::for_params(&theta);
    let mut log = TrainLog::default();
    for step in 1..=config.steps {
        let batch: Vec<&Episode> = (0..config.batch_size)
            .map(|_| &dataset.train[rng.below(dataset.train.len())])
            .collect();
        let (loss, grads) = batch_loss_and_grad(&theta, &batch, config.policy, rng)?;
        adam_step(&mut theta, &grads, &mut state, &config.adam);
        log.losses.push(loss);
        if config.eval_every > 0 && step % config.eval_every == 0 && !dataset.val.is_empty() {
            let (val_loss, val_accuracy) = validation(&theta, &dataset.val, config.policy)?;
            log.evals.push(EvalRecord {
                step,
                val_loss,
                val_accuracy,
            });
        }
    }
    if !theta.is_finite() {
        return Err(Error::invalid("training diverged to non-finite parameters"));
    }
    Ok((theta, log))
}
