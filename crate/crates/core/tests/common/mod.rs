#![allow(dead_code)]

use when2com::densemath::{Matrix, Rng};
use when2com::neuralnet::{cross_entropy_loss, forward_with, pipeline_backward, Fusion, PipelineDims, PipelineParams};

/// Small configuration for finite-difference checks.
pub fn fd_dims() -> PipelineDims {
    PipelineDims {
        obs_dim: 8,
        query_dim: 2,
        key_dim: 4,
        feature_dim: 8,
        n_classes: 3,
        hidden: 16,
    }
}

pub fn random_obs(rng: &mut Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
}

fn loss(theta: &PipelineParams, obs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let out = forward_with(theta, obs, &Fusion::Soft { exclude_self: false }).unwrap();
    cross_entropy_loss(&out.logits, labels).unwrap()
}

/// Per-tensor maximum of `|a - n| / max(|a|, |n|, floor)` between the
/// analytic gradient and central differences with step `eps`.
pub fn fd_rel_errors(theta: &PipelineParams, obs: &[Vec<f64>], labels: &[usize], eps: f64, floor: f64) -> Vec<f64> {
    let out = forward_with(theta, obs, &Fusion::Soft { exclude_self: false }).unwrap();
    let grads = pipeline_backward(&out.cache, theta, labels).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
    let mut errs = Vec::with_capacity(analytic.len());
    for (t, g) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (e, &a) in g.iter().enumerate() {
            let mut plus = theta.clone();
            plus.tensors_mut()[t][e] += eps;
            let mut minus = theta.clone();
            minus.tensors_mut()[t][e] -= eps;
            let n = (loss(&plus, obs, labels) - loss(&minus, obs, labels)) / (2.0 * eps);
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(floor));
        }
        errs.push(worst);
    }
    errs
}

fn mlp(layers: &[when2com::neuralnet::Layer], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (li, l) in layers.iter().enumerate() {
        let mut y = l.bias.clone();
        for (r, yr) in y.iter_mut().enumerate() {
            for (c, &hc) in h.iter().enumerate() {
                *yr += l.weight.get(r, c) * hc;
            }
        }
        if li + 1 < layers.len() {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        h = y;
    }
    h
}

/// Straight-line reference: generators, bilinear scores, row softmax,
/// optional threshold, weighted sum, concatenation, decoder.
pub fn oracle_logits(theta: &PipelineParams, obs: &[Vec<f64>], delta: Option<f64>) -> Vec<Vec<f64>> {
    let n = obs.len();
    let mu: Vec<Vec<f64>> = obs.iter().map(|x| mlp(&theta.theta_q.layers, x)).collect();
    let kappa: Vec<Vec<f64>> = obs.iter().map(|x| mlp(&theta.theta_k.layers, x)).collect();
    let f: Vec<Vec<f64>> = obs.iter().map(|x| mlp(&theta.theta_e.layers, x)).collect();
    let w: &Matrix = &theta.w_g.w_g;
    let k = kappa[0].len() as f64;
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = vec![0.0; n];
        for (j, sj) in s.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..mu[i].len() {
                for b in 0..kappa[j].len() {
                    acc += mu[i][a] * w.get(a, b) * kappa[j][b];
                }
            }
            *sj = acc / k.sqrt();
        }
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut row: Vec<f64> = e.iter().map(|v| v / z).collect();
        if let Some(d) = delta {
            row.iter_mut().for_each(|v| {
                if *v < d {
                    *v = 0.0
                }
            });
        }
        let mut fused = vec![0.0; f[i].len()];
        for j in 0..n {
            for (a, b) in fused.iter_mut().zip(&f[j]) {
                *a += row[j] * b;
            }
        }
        let mut input = f[i].clone();
        input.extend(fused);
        logits.push(mlp(&theta.theta_d.layers, &input));
    }
    logits
}
