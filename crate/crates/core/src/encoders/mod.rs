//! Unimodal encoders: reconstruction-trained autoencoders for sensor
//! modalities, a deterministic offline label embedder for label binding,
//! and projection heads producing unit-norm embeddings.

pub mod labels;
pub mod mlp;

pub use labels::{LabelEmbedder, LabelEmbeddingProvider, OfflineLabelEmbedder};
pub use mlp::{cross_entropy_loss_grad, mse_loss_grad, Activation, Linear, Mlp, MlpCache, MlpGrads, SgdState};

use crate::corpus::ModalityId;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scalar::{num, Scalar};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

fn default_epochs() -> usize {
    100
}

fn default_batch_size() -> usize {
    64
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_momentum() -> f64 {
    0.9
}

fn default_latent_dim() -> usize {
    32
}

/// Autoencoder architecture and training scalars for one modality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub modality: ModalityId,
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "EncoderSpec::default_activation")]
    pub activation: Activation,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

impl EncoderSpec {
    fn default_activation() -> Activation {
        Activation::Relu
    }

    pub fn new(modality: impl Into<ModalityId>, hidden_dims: Vec<usize>, latent_dim: usize) -> Self {
        EncoderSpec {
            modality: modality.into(),
            hidden_dims,
            latent_dim,
            activation: Activation::Relu,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
        }
    }

    pub fn for_modality(&self, modality: impl Into<ModalityId>) -> Self {
        let mut spec = self.clone();
        spec.modality = modality.into();
        spec
    }

    /// Latent dim may equal the input dim (linear identity regime) but
    /// never exceed it: the encoder is a bottleneck.
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::validation("latent_dim", "must be >= 1"));
        }
        if self.latent_dim > input_dim {
            return Err(Error::validation(
                "latent_dim",
                format!("{} exceeds input dim {input_dim}", self.latent_dim),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be >= 1"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::validation("learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("momentum", "must be in [0, 1)"));
        }
        Ok(())
    }

    fn encoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.latent_dim);
        dims
    }

    fn decoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(self.hidden_dims.iter().rev());
        dims.push(input_dim);
        dims
    }
}

/// A trained encoder mapping one modality to its latent space.
#[derive(Clone, Debug)]
pub struct UnimodalEncoder<T> {
    pub modality: ModalityId,
    pub net: Mlp<T>,
}

impl<T: Scalar> UnimodalEncoder<T> {
    pub fn input_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.net.out_dim()
    }
}

/// Encoder + decoder pair with the recorded training curve.
#[derive(Clone, Debug)]
pub struct Autoencoder<T> {
    pub encoder: UnimodalEncoder<T>,
    pub decoder: Mlp<T>,
    pub loss_curve: Vec<f64>,
}

/// Train a symmetric MLP autoencoder on `data` by minimizing the mean
/// squared reconstruction error. Deterministic per seed.
pub fn train_autoencoder<T: Scalar>(
    data: &Array2<T>,
    spec: &EncoderSpec,
    seed: u64,
) -> Result<Autoencoder<T>> {
    if data.nrows() == 0 {
        return Err(Error::EmptyInput("autoencoder training data".into()));
    }
    spec.validate(data.ncols())?;

    let mut rng = seeded(derive_seed(seed, "autoencoder-init"));
    let mut encoder = Mlp::new(&spec.encoder_dims(data.ncols()), spec.activation, &mut rng);
    let mut decoder = Mlp::new(&spec.decoder_dims(data.ncols()), spec.activation, &mut rng);
    let mut enc_state = SgdState::new(&encoder);
    let mut dec_state = SgdState::new(&decoder);
    let lr = num::<T>(spec.learning_rate);
    let momentum = num::<T>(spec.momentum);

    let n = data.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = seeded(derive_seed(seed, "autoencoder-batches"));
    let mut loss_curve = Vec::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(spec.batch_size) {
            let batch = gather_rows(data, chunk);
            let (latent, enc_cache) = encoder.forward_cached(&batch);
            let (recon, dec_cache) = decoder.forward_cached(&latent);
            let (loss, grad_out) = mse_loss_grad(&recon, &batch);
            let lf = loss.to_f64_lossy();
            if !lf.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: format!("autoencoder[{}]", spec.modality),
                    epoch,
                    lr: spec.learning_rate,
                });
            }
            epoch_loss += lf * chunk.len() as f64;
            let (dec_grads, grad_latent) = decoder.backward(&dec_cache, &grad_out);
            let (enc_grads, _) = encoder.backward(&enc_cache, &grad_latent);
            dec_state.step(&mut decoder, &dec_grads, lr, momentum);
            enc_state.step(&mut encoder, &enc_grads, lr, momentum);
        }
        loss_curve.push(epoch_loss / n as f64);
    }

    Ok(Autoencoder {
        encoder: UnimodalEncoder {
            modality: spec.modality.clone(),
            net: encoder,
        },
        decoder,
        loss_curve,
    })
}

/// Embed a batch of samples; row `i` is a deterministic function of sample `i`.
pub fn encode<T: Scalar>(encoder: &UnimodalEncoder<T>, samples: &Array2<T>) -> Result<Array2<T>> {
    if samples.ncols() != encoder.input_dim() {
        return Err(Error::ShapeMismatch {
            context: format!("encode[{}]", encoder.modality),
            expected: vec![encoder.input_dim()],
            actual: vec![samples.ncols()],
        });
    }
    Ok(encoder.net.forward(samples))
}

/// Epsilon added to the norm before dividing, so zero vectors stay finite.
pub const NORM_EPSILON: f64 = 1e-12;

/// Row-wise `v / (‖v‖ + ε)`. Returns the normalized rows and the raw norms
/// (needed by the backward pass).
pub fn normalize_rows<T: Scalar>(x: &Array2<T>) -> (Array2<T>, Array1<T>) {
    let eps = num::<T>(NORM_EPSILON);
    let mut out = x.to_owned();
    let mut norms = Array1::zeros(x.nrows());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let norm = row.iter().map(|v| *v * *v).sum::<T>().sqrt();
        norms[i] = norm;
        let scale = T::one() / (norm + eps);
        row.mapv_inplace(|v| v * scale);
    }
    (out, norms)
}

/// Backward of [`normalize_rows`]: given dL/dz, the raw pre-normalization
/// rows and their norms, produce dL/dv. Rows at the exact origin get zero
/// gradient (the forward output there is constant zero).
pub fn normalize_rows_backward<T: Scalar>(
    grad_z: &Array2<T>,
    raw: &Array2<T>,
    norms: &Array1<T>,
) -> Array2<T> {
    let eps = num::<T>(NORM_EPSILON);
    let mut out = Array2::zeros(raw.raw_dim());
    for i in 0..raw.nrows() {
        let n = norms[i];
        if n <= eps {
            continue;
        }
        let s = n + eps;
        let v = raw.row(i);
        let g = grad_z.row(i);
        let dot = v.dot(&g);
        let coeff = dot / (s * s * n);
        let inv = T::one() / s;
        for j in 0..raw.ncols() {
            out[(i, j)] = g[j] * inv - v[j] * coeff;
        }
    }
    out
}

/// Apply a projection head and normalize each output row onto the unit
/// sphere (norm 1 within 1e-6 for any nonzero head output).
pub fn project_and_normalize<T: Scalar>(features: &Array2<T>, head: &Mlp<T>) -> Result<Array2<T>> {
    if features.ncols() != head.in_dim() {
        return Err(Error::ShapeMismatch {
            context: "projection head input".into(),
            expected: vec![head.in_dim()],
            actual: vec![features.ncols()],
        });
    }
    let raw = head.forward(features);
    Ok(normalize_rows(&raw).0)
}

/// Default projection dimension F.
pub const DEFAULT_PROJECTION_DIM: usize = 128;

pub(crate) fn gather_rows<T: Scalar>(data: &Array2<T>, indices: &[usize]) -> Array2<T> {
    let mut out = Array2::zeros((indices.len(), data.ncols()));
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).assign(&data.row(i));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct EncoderManifest {
    modality: ModalityId,
    input_dim: usize,
    dims: Vec<usize>,
    activation: Activation,
    spec: EncoderSpec,
    seed: u64,
    param_count: usize,
}

/// Persist an encoder as a manifest plus a flat little-endian float32
/// parameter array, addressable by modality.
pub fn save_encoder<T: Scalar>(
    enc: &UnimodalEncoder<T>,
    spec: &EncoderSpec,
    seed: u64,
    dir: &Path,
) -> Result<()> {
    let sub = dir.join(enc.modality.as_str());
    fs::create_dir_all(&sub)?;
    let manifest = EncoderManifest {
        modality: enc.modality.clone(),
        input_dim: enc.input_dim(),
        dims: enc.net.dims(),
        activation: enc.net.activation(),
        spec: spec.clone(),
        seed,
        param_count: enc.net.num_params(),
    };
    let f = File::create(sub.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    let params: Vec<f32> = enc.net.flatten().iter().map(|v| v.to_f64_lossy() as f32).collect();
    crate::corpus::format::write_f32s(&sub.join("params.bin"), params.into_iter())?;
    Ok(())
}

/// Load an encoder previously written by [`save_encoder`].
pub fn load_encoder<T: Scalar>(dir: &Path, modality: &ModalityId) -> Result<UnimodalEncoder<T>> {
    let sub = dir.join(modality.as_str());
    let manifest_path = sub.join("manifest.json");
    let manifest: EncoderManifest =
        serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
            .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
    let raw = crate::corpus::format::read_f32s(&sub.join("params.bin"))?;
    let mut net = Mlp::<T>::seeded(&manifest.dims, manifest.activation, 0);
    if raw.len() != net.num_params() {
        return Err(Error::ShapeMismatch {
            context: format!("encoder params for {modality}"),
            expected: vec![net.num_params()],
            actual: vec![raw.len()],
        });
    }
    let params: Vec<T> = raw.iter().map(|v| T::from_f32(*v).unwrap()).collect();
    net.load_flat(&params)?;
    Ok(UnimodalEncoder {
        modality: manifest.modality,
        net,
    })
}

#[cfg(test)]
mod tests;
