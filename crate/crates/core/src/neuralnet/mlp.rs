use crate::densemath::{relu, Matrix, Rng};
use crate::error::{Error, Result};

/// One affine layer, `y = W x + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Fully-connected network with rectifiers between layers and a linear
/// final layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Per-call values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input seen by each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

impl MlpParams {
    /// He-style init: weights `~ N(0, 2/fan_in)`, zero biases.
    /// `sizes` lists the width of every layer boundary, input first.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (2.0 / fan_in as f64).sqrt();
                let values = (0..fan_in * fan_out).map(|_| std * rng.normal()).collect();
                Layer {
                    weight: Matrix::new(fan_out, fan_in, values).expect("finite init"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Sizes at each layer boundary, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub(crate) fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.values(), l.bias.as_slice()])
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.values_mut(), l.bias.as_mut_slice()])
    }
}

/// Forward pass; returns the output and the cache needed by [`mlp_backward`].
pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
    if x.len() != p.in_dim() {
        return Err(Error::shape(
            format!("mlp input {}", p.in_dim()),
            format!("vector of length {}", x.len()),
        ));
    }
    let mut cache = MlpCache {
        inputs: Vec::with_capacity(p.layers.len()),
        pre: Vec::with_capacity(p.layers.len()),
    };
    let mut h = x.to_vec();
    let last = p.layers.len() - 1;
    for (idx, layer) in p.layers.iter().enumerate() {
        let mut z = layer.weight.matvec(&h)?;
        for (zi, bi) in z.iter_mut().zip(&layer.bias) {
            *zi += bi;
        }
        cache.inputs.push(h);
        h = if idx == last { z.clone() } else { relu(&z) };
        cache.pre.push(z);
    }
    Ok((h, cache))
}

/// Backward pass. Accumulates parameter gradients into `grads` and returns
/// the gradient with respect to the input.
pub fn mlp_backward(p: &MlpParams, cache: &MlpCache, dy: &[f64], grads: &mut MlpParams) -> Vec<f64> {
    let last = p.layers.len() - 1;
    let mut delta = dy.to_vec();
    for idx in (0..p.layers.len()).rev() {
        if idx != last {
            for (d, &z) in delta.iter_mut().zip(&cache.pre[idx]) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let layer = &p.layers[idx];
        let input = &cache.inputs[idx];
        let g = &mut grads.layers[idx];
        for (r, &d) in delta.iter().enumerate() {
            g.bias[r] += d;
            if d != 0.0 {
                for (gw, &x) in g.weight.row_mut(r).iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
        }
        delta = layer
            .weight
            .matvec_transposed(&delta)
            .expect("cache built by mlp_forward on these params");
    }
    delta
}
