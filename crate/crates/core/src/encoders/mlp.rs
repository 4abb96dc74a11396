//! Minimal fully-connected network with explicit backprop and SGD+momentum.
//!
//! Layers are `y = x W^T + b` with the hidden activation applied after every
//! layer except the last. Gradients are exact; the Eq-check suites compare
//! them against central finite differences.

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::{num, Scalar};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    /// Linear network (no nonlinearity anywhere).
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, x: &mut Array2<T>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Tanh => x.mapv_inplace(|v| v.tanh()),
            Activation::Identity => {}
        }
    }

    /// Derivative expressed through the post-activation output.
    fn backprop<T: Scalar>(self, grad: &mut Array2<T>, output: &Array2<T>) {
        match self {
            Activation::Relu => {
                grad.zip_mut_with(output, |g, &y| {
                    if y <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            Activation::Tanh => {
                grad.zip_mut_with(output, |g, &y| *g = *g * (T::one() - y * y));
            }
            Activation::Identity => {}
        }
    }
}

#[derive(Clone, Debug)]
pub struct Linear<T> {
    pub weight: Array2<T>, // [out × in]
    pub bias: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    /// PyTorch-style init: W, b ~ U(-1/sqrt(in), 1/sqrt(in)). The nonzero
    /// bias keeps zero-input (dummy) activations off the exact origin.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut weight = Array2::zeros((out_dim, in_dim));
        for v in weight.iter_mut() {
            *v = num::<T>(rng.random_range(-bound..bound));
        }
        let mut bias = Array1::zeros(out_dim);
        for v in bias.iter_mut() {
            *v = num::<T>(rng.random_range(-bound..bound));
        }
        Linear { weight, bias }
    }

    fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Per-layer parameter gradients.
#[derive(Clone, Debug)]
pub struct MlpGrads<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGrads<T>) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }
}

/// Forward cache: input to each layer plus each layer's post-activation
/// output, in layer order.
pub struct MlpCache<T> {
    inputs: Vec<Array2<T>>,
    outputs: Vec<Array2<T>>,
}

#[derive(Clone, Debug)]
pub struct Mlp<T> {
    layers: Vec<Linear<T>>,
    activation: Activation,
}

impl<T: Scalar> Mlp<T> {
    /// `dims = [input, hidden..., output]`.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Mlp { layers, activation }
    }

    pub fn seeded(dims: &[usize], activation: Activation, seed: u64) -> Self {
        Mlp::new(dims, activation, &mut seeded(seed))
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Linear<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear<T>] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.weight.nrows()));
        d
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                self.activation.apply(&mut h);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            let mut out = layer.forward(&h);
            if i < last {
                self.activation.apply(&mut out);
            }
            outputs.push(out.clone());
            h = out;
        }
        (h, MlpCache { inputs, outputs })
    }

    /// Backprop `grad_out` (dL/dy) through the cached forward pass.
    /// Returns parameter gradients and dL/dx.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Array2<T>) -> (MlpGrads<T>, Array2<T>) {
        let last = self.layers.len() - 1;
        let mut grads = vec![
            (Array2::<T>::zeros((0, 0)), Array1::<T>::zeros(0));
            self.layers.len()
        ];
        let mut g = grad_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                self.activation.backprop(&mut g, &cache.outputs[i]);
            }
            let x = &cache.inputs[i];
            let dw = g.t().dot(x);
            let db = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].weight);
            grads[i] = (dw, db);
        }
        (MlpGrads { layers: grads }, g)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Flatten parameters in layer order (weights row-major, then bias).
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn load_flat(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                context: "mlp parameters".into(),
                expected: vec![self.num_params()],
                actual: vec![params.len()],
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            for v in l.weight.iter_mut() {
                *v = params[at];
                at += 1;
            }
            for v in l.bias.iter_mut() {
                *v = params[at];
                at += 1;
            }
        }
        Ok(())
    }
}

/// SGD with momentum: v = m·v − lr·g; p += v.
#[derive(Clone, Debug)]
pub struct SgdState<T> {
    velocity: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(net: &Mlp<T>) -> Self {
        SgdState {
            velocity: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &MlpGrads<T>, lr: T, momentum: T) {
        for ((layer, (vw, vb)), (gw, gb)) in
            net.layers.iter_mut().zip(&mut self.velocity).zip(&grads.layers)
        {
            vw.zip_mut_with(gw, |v, &g| *v = momentum * *v - lr * g);
            vb.zip_mut_with(gb, |v, &g| *v = momentum * *v - lr * g);
            layer.weight += &*vw;
            layer.bias += &*vb;
        }
    }
}

/// Mean over the batch of the squared L2 reconstruction error, plus dL/dy.
pub fn mse_loss_grad<T: Scalar>(pred: &Array2<T>, target: &Array2<T>) -> (T, Array2<T>) {
    let batch = num::<T>(pred.nrows() as f64);
    let diff = pred - target;
    let loss = diff.iter().map(|v| *v * *v).sum::<T>() / batch;
    let grad = diff.mapv(|v| num::<T>(2.0) * v / batch);
    (loss, grad)
}

/// Softmax cross-entropy over class logits: mean −log p[y], plus dL/dlogits.
pub fn cross_entropy_loss_grad<T: Scalar>(
    logits: &Array2<T>,
    labels: &[u32],
) -> (T, Array2<T>) {
    let (b, c) = (logits.nrows(), logits.ncols());
    debug_assert_eq!(b, labels.len());
    let batch = num::<T>(b as f64);
    let mut grad = Array2::<T>::zeros((b, c));
    let mut loss = T::zero();
    for i in 0..b {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        let y = labels[i] as usize;
        loss += -(row[y] - max - sum.ln());
        for j in 0..c {
            let p = exps[j] / sum;
            grad[(i, j)] = (p - if j == y { T::one() } else { T::zero() }) / batch;
        }
    }
    (loss / batch, grad)
}
