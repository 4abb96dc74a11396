//! Supervised fine-tuning (and from-scratch supervised training) of the
//! classifier over the multimodal encoders.

use super::model::MultimodalModel;
use crate::encoders::{cross_entropy_loss_grad, SgdState};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scalar::{num, Scalar};
use crate::corpus::Dataset;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

fn default_epochs() -> usize {
    50
}

fn default_batch_size() -> usize {
    64
}

fn default_learning_rate() -> f64 {
    1e-2
}

fn default_momentum() -> f64 {
    0.9
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneMode {
    /// Update encoders and classifier.
    #[default]
    Full,
    /// Freeze encoders; train the classifier only.
    LinearProbe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinetuneConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub mode: FinetuneMode,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            mode: FinetuneMode::Full,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("finetune.batch_size", "must be >= 1"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::validation("finetune.learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("finetune.momentum", "must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FinetuneReport {
    pub loss_curve: Vec<f64>,
    pub train_accuracy: f64,
}

/// Assemble per-modality input matrices for a labeled dataset, zeroing any
/// modality excluded by `modality_mask` (or absent from the dataset).
pub(crate) fn model_inputs<T: Scalar>(
    model: &MultimodalModel<T>,
    data: &Dataset,
    modality_mask: Option<&[bool]>,
) -> Result<(Vec<Array2<T>>, Array2<bool>)> {
    let m = model.num_modalities();
    if let Some(mask) = modality_mask {
        if mask.len() != m {
            return Err(Error::ShapeMismatch {
                context: "modality mask".into(),
                expected: vec![m],
                actual: vec![mask.len()],
            });
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::validation("modality_mask", "must select at least one modality"));
        }
    }
    let n = data.len();
    let mut views = Vec::with_capacity(m);
    let mut mask = Array2::from_elem((n, m), false);
    for (k, (mod_id, dim)) in model.spec.modalities.iter().enumerate() {
        let selected = modality_mask.map_or(true, |mm| mm[k]);
        if selected && data.has_modality(mod_id) {
            let v = data.view_as::<T>(mod_id)?;
            if v.ncols() != *dim {
                return Err(Error::ShapeMismatch {
                    context: format!("modality '{mod_id}'"),
                    expected: vec![*dim],
                    actual: vec![v.ncols()],
                });
            }
            views.push(v);
            for i in 0..n {
                mask[(i, k)] = true;
            }
        } else {
            views.push(Array2::zeros((n, *dim)));
        }
    }
    Ok((views, mask))
}

/// Fine-tune on a labeled paired dataset. `modality_mask` simulates a
/// deployment-time sensor suite: deselected modalities are fed as zero
/// dummies during training too.
pub fn finetune<T: Scalar>(
    model: &mut MultimodalModel<T>,
    data: &Dataset,
    cfg: &FinetuneConfig,
    modality_mask: Option<&[bool]>,
    seed: u64,
) -> Result<FinetuneReport> {
    cfg.validate()?;
    let labels = data
        .labels()
        .ok_or_else(|| Error::validation("finetune", format!("dataset '{}' has no labels", data.name)))?
        .to_vec();
    if labels.is_empty() {
        return Err(Error::EmptyInput("finetune set".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= model.spec.num_classes) {
        return Err(Error::validation(
            "finetune.labels",
            format!("label {bad} out of range [0, {})", model.spec.num_classes),
        ));
    }
    let (views, mask) = model_inputs(model, data, modality_mask)?;
    supervised_train(model, &views, &mask, &labels, cfg, seed)
}

/// Shared supervised loop over explicit inputs; used by fine-tuning and by
/// the supervised pre-training baselines (which carry per-sample masks).
pub(crate) fn supervised_train<T: Scalar>(
    model: &mut MultimodalModel<T>,
    views: &[Array2<T>],
    mask: &Array2<bool>,
    labels: &[u32],
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneReport> {
    cfg.validate()?;
    model.ensure_classifier(seed);
    let m = model.num_modalities();
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyInput("supervised training set".into()));
    }

    let freeze_encoders = cfg.mode == FinetuneMode::LinearProbe;
    let mut enc_states: Vec<SgdState<T>> = model.encoders.iter().map(SgdState::new).collect();
    let mut cls_state = SgdState::new(model.classifier.as_ref().unwrap());
    let lr = num::<T>(cfg.learning_rate);
    let momentum = num::<T>(cfg.momentum);

    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = seeded(derive_seed(seed, "finetune-batches"));
    let mut report = FinetuneReport::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let batch_labels: Vec<u32> = chunk.iter().map(|&i| labels[i]).collect();
            let mut batch_mask = Array2::from_elem((b, m), false);
            for (r, &i) in chunk.iter().enumerate() {
                for k in 0..m {
                    batch_mask[(r, k)] = mask[(i, k)];
                }
            }

            let mut feats = Vec::with_capacity(m);
            let mut enc_caches = Vec::with_capacity(m);
            for k in 0..m {
                let x = crate::encoders::gather_rows(&views[k], chunk);
                let (f, cache) = model.encoders[k].forward_cached(&x);
                feats.push(f);
                enc_caches.push(cache);
            }
            let cls_in = model.classifier_input(&feats, &batch_mask);
            let classifier = model.classifier.as_ref().unwrap();
            let (logits, cls_cache) = classifier.forward_cached(&cls_in);
            let (loss, grad_logits) = cross_entropy_loss_grad(&logits, &batch_labels);
            let loss_f = loss.to_f64_lossy();
            if !loss_f.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "finetune".into(),
                    epoch,
                    lr: cfg.learning_rate,
                });
            }
            epoch_loss += loss_f * b as f64;

            let (cls_grads, grad_in) = classifier.backward(&cls_cache, &grad_logits);
            if !freeze_encoders {
                let latent = model.spec.latent_dim;
                for k in 0..m {
                    let g = grad_in.slice(ndarray::s![.., k * latent..(k + 1) * latent]).to_owned();
                    let (enc_grads, _) = model.encoders[k].backward(&enc_caches[k], &g);
                    enc_states[k].step(&mut model.encoders[k], &enc_grads, lr, momentum);
                }
            }
            cls_state.step(model.classifier.as_mut().unwrap(), &cls_grads, lr, momentum);
        }
        report.loss_curve.push(epoch_loss / n as f64);
    }

    // Final train accuracy.
    let mut feats = Vec::with_capacity(m);
    for k in 0..m {
        feats.push(model.encoders[k].forward(&views[k]));
    }
    let logits = model
        .classifier
        .as_ref()
        .unwrap()
        .forward(&model.classifier_input(&feats, mask));
    let mut correct = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if pred == y as usize {
            correct += 1;
        }
    }
    report.train_accuracy = correct as f64 / n as f64;
    Ok(report)
}
