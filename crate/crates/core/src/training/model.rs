//! The multimodal model: one encoder + projection head per modality and an
//! optional classifier over concatenated encoder features (with the
//! presence mask appended as a prompt vector when configured).

use crate::corpus::ModalityId;
use crate::encoders::{Activation, Mlp, DEFAULT_PROJECTION_DIM};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

fn default_projection_dim() -> usize {
    DEFAULT_PROJECTION_DIM
}

fn default_activation() -> Activation {
    Activation::Relu
}

/// Architecture of the multimodal model.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    /// Sensor modalities and their input dims, in canonical order.
    pub modalities: Vec<(ModalityId, usize)>,
    #[serde(default)]
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    #[serde(default)]
    pub head_hidden: Vec<usize>,
    /// Projection dimension F.
    #[serde(default = "default_projection_dim")]
    pub projection_dim: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub classifier_hidden: Vec<usize>,
    pub num_classes: usize,
    /// Append the presence mask to the classifier input (prompting).
    #[serde(default)]
    pub use_prompt: bool,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::validation("model.modalities", "must be non-empty"));
        }
        if self.latent_dim == 0 {
            return Err(Error::validation("model.latent_dim", "must be >= 1"));
        }
        if self.projection_dim == 0 {
            return Err(Error::validation("model.projection_dim", "must be >= 1"));
        }
        if self.num_classes == 0 {
            return Err(Error::validation("model.num_classes", "must be >= 1"));
        }
        Ok(())
    }

    pub fn modality_index(&self, m: &ModalityId) -> Option<usize> {
        self.modalities.iter().position(|(name, _)| name == m)
    }

    fn encoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.encoder_hidden);
        dims.push(self.latent_dim);
        dims
    }

    fn head_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.head_hidden);
        dims.push(self.projection_dim);
        dims
    }

    pub fn classifier_input_dim(&self) -> usize {
        self.latent_dim * self.modalities.len()
            + if self.use_prompt { self.modalities.len() } else { 0 }
    }

    fn classifier_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.classifier_input_dim()];
        dims.extend(&self.classifier_hidden);
        dims.push(self.num_classes);
        dims
    }
}

/// Per-modality encoders and projection heads plus an optional classifier.
#[derive(Clone, Debug)]
pub struct MultimodalModel<T> {
    pub spec: ModelSpec,
    pub encoders: Vec<Mlp<T>>,
    pub heads: Vec<Mlp<T>>,
    pub classifier: Option<Mlp<T>>,
}

impl<T: Scalar> MultimodalModel<T> {
    /// Seeded initialization; per-component streams are derived from the
    /// modality name so adding a modality does not shift the others.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut encoders = Vec::with_capacity(spec.modalities.len());
        let mut heads = Vec::with_capacity(spec.modalities.len());
        for (m, dim) in &spec.modalities {
            let mut rng = seeded(derive_seed(seed, &format!("encoder-{m}")));
            encoders.push(Mlp::new(&spec.encoder_dims(*dim), spec.activation, &mut rng));
            let mut rng = seeded(derive_seed(seed, &format!("head-{m}")));
            heads.push(Mlp::new(&spec.head_dims(), spec.activation, &mut rng));
        }
        Ok(MultimodalModel {
            spec,
            encoders,
            heads,
            classifier: None,
        })
    }

    pub fn num_modalities(&self) -> usize {
        self.spec.modalities.len()
    }

    /// Create the classifier if absent (seeded independently).
    pub fn ensure_classifier(&mut self, seed: u64) {
        if self.classifier.is_none() {
            let mut rng = seeded(derive_seed(seed, "classifier"));
            self.classifier = Some(Mlp::new(
                &self.spec.classifier_dims(),
                self.spec.activation,
                &mut rng,
            ));
        }
    }

    /// Encoder features for one modality batch.
    pub fn encode_modality(&self, k: usize, x: &Array2<T>) -> Result<Array2<T>> {
        let (_, dim) = &self.spec.modalities[k];
        if x.ncols() != *dim {
            return Err(Error::ShapeMismatch {
                context: format!("modality '{}' input", self.spec.modalities[k].0),
                expected: vec![*dim],
                actual: vec![x.ncols()],
            });
        }
        Ok(self.encoders[k].forward(x))
    }

    /// Concatenated encoder features (plus prompt bits when configured)
    /// ready for the classifier.
    pub fn classifier_input(&self, feats: &[Array2<T>], mask: &Array2<bool>) -> Array2<T> {
        let b = feats[0].nrows();
        let mut out = Array2::zeros((b, self.spec.classifier_input_dim()));
        let latent = self.spec.latent_dim;
        for (k, f) in feats.iter().enumerate() {
            out.slice_mut(ndarray::s![.., k * latent..(k + 1) * latent]).assign(f);
        }
        if self.spec.use_prompt {
            let base = latent * feats.len();
            for i in 0..b {
                for k in 0..feats.len() {
                    out[(i, base + k)] = if mask[(i, k)] { T::one() } else { T::zero() };
                }
            }
        }
        out
    }

    pub fn flatten_all(&self) -> Vec<T> {
        let mut out = Vec::new();
        for e in &self.encoders {
            out.extend(e.flatten());
        }
        for h in &self.heads {
            out.extend(h.flatten());
        }
        if let Some(c) = &self.classifier {
            out.extend(c.flatten());
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentEntry {
    name: String,
    dims: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    spec: ModelSpec,
    components: Vec<ComponentEntry>,
    param_count: usize,
}

/// Persist a model as a manifest plus one flat float32 parameter blob.
pub fn save_model<T: Scalar>(model: &MultimodalModel<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut components = Vec::new();
    let mut blob: Vec<f32> = Vec::new();
    let push = |name: String, net: &Mlp<T>, blob: &mut Vec<f32>, components: &mut Vec<ComponentEntry>| {
        let flat = net.flatten();
        components.push(ComponentEntry {
            name,
            dims: net.dims(),
            offset: blob.len(),
            len: flat.len(),
        });
        blob.extend(flat.iter().map(|v| v.to_f64_lossy() as f32));
    };
    for ((m, _), net) in model.spec.modalities.iter().zip(&model.encoders) {
        push(format!("encoder/{m}"), net, &mut blob, &mut components);
    }
    for ((m, _), net) in model.spec.modalities.iter().zip(&model.heads) {
        push(format!("head/{m}"), net, &mut blob, &mut components);
    }
    if let Some(c) = &model.classifier {
        push("classifier".into(), c, &mut blob, &mut components);
    }
    let manifest = ModelManifest {
        spec: model.spec.clone(),
        param_count: blob.len(),
        components,
    };
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(dir.join("manifest.json"))?),
        &manifest,
    )?;
    crate::corpus::format::write_f32s(&dir.join("params.bin"), blob.into_iter())?;
    Ok(())
}

/// Load a model saved by [`save_model`].
pub fn load_model<T: Scalar>(dir: &Path) -> Result<MultimodalModel<T>> {
    let manifest_path = dir.join("manifest.json");
    let manifest: ModelManifest = serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
    let blob = crate::corpus::format::read_f32s(&dir.join("params.bin"))?;
    if blob.len() != manifest.param_count {
        return Err(Error::ShapeMismatch {
            context: "model parameter blob".into(),
            expected: vec![manifest.param_count],
            actual: vec![blob.len()],
        });
    }
    let mut model = MultimodalModel::<T>::init(manifest.spec.clone(), 0)?;
    let restore = |name: &str, net: &mut Mlp<T>| -> Result<()> {
        let entry = manifest
            .components
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::format(dir.display().to_string(), format!("missing component '{name}'")))?;
        let slice = &blob[entry.offset..entry.offset + entry.len];
        let params: Vec<T> = slice.iter().map(|v| T::from_f32(*v).unwrap()).collect();
        net.load_flat(&params)
    };
    let modalities = manifest.spec.modalities.clone();
    for (k, (m, _)) in modalities.iter().enumerate() {
        let mut enc = model.encoders[k].clone();
        restore(&format!("encoder/{m}"), &mut enc)?;
        model.encoders[k] = enc;
        let mut head = model.heads[k].clone();
        restore(&format!("head/{m}"), &mut head)?;
        model.heads[k] = head;
    }
    if manifest.components.iter().any(|c| c.name == "classifier") {
        model.ensure_classifier(0);
        let mut c = model.classifier.take().unwrap();
        restore("classifier", &mut c)?;
        model.classifier = Some(c);
    }
    Ok(model)
}
