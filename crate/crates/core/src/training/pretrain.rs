//! Weighted contrastive pre-training over the aggregated set.

use super::loss::{weighted_contrastive_loss_with_grad, LossBatch};
use super::model::MultimodalModel;
use super::{AggregatedTrainingSet, ContrastiveConfig};
use crate::encoders::{normalize_rows, normalize_rows_backward, SgdState};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scalar::{num, Scalar};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::Serialize;

/// Per-epoch mean loss (per sample) recorded during pre-training.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PretrainReport {
    pub loss_curve: Vec<f64>,
}

/// Train the model's encoders and projection heads in place. Deterministic
/// per seed; aborts on non-finite loss.
pub fn pretrain<T: Scalar>(
    model: &mut MultimodalModel<T>,
    set: &AggregatedTrainingSet,
    cfg: &ContrastiveConfig,
    seed: u64,
) -> Result<PretrainReport> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyInput("pre-training set".into()));
    }
    let m = model.num_modalities();
    if set.modalities.len() != m
        || set
            .modalities
            .iter()
            .zip(&model.spec.modalities)
            .any(|(a, (b, _))| a != b)
    {
        return Err(Error::validation(
            "pretrain",
            format!(
                "training-set modalities {:?} do not match model modalities {:?}",
                set.modalities,
                model.spec.modalities.iter().map(|(m, _)| m).collect::<Vec<_>>()
            ),
        ));
    }

    let views: Vec<Array2<T>> = set
        .views
        .iter()
        .map(|v| v.mapv(|x| T::from_f32(x).unwrap()))
        .collect();
    let weights: Vec<T> = set.weights.iter().map(|w| num::<T>(*w)).collect();

    let mut enc_states: Vec<SgdState<T>> = model.encoders.iter().map(SgdState::new).collect();
    let mut head_states: Vec<SgdState<T>> = model.heads.iter().map(SgdState::new).collect();
    let lr = num::<T>(cfg.learning_rate);
    let momentum = num::<T>(cfg.momentum);
    let tau = num::<T>(cfg.temperature);

    let n = set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = seeded(derive_seed(seed, "pretrain-batches"));
    let mut report = PretrainReport::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut counted = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // A singleton tail batch has no negatives; skip it.
            if chunk.len() < 2 {
                continue;
            }
            let b = chunk.len();
            let batch_views: Vec<Array2<T>> = views
                .iter()
                .map(|v| crate::encoders::gather_rows(v, chunk))
                .collect();
            let batch_weights: Vec<T> = chunk.iter().map(|&i| weights[i]).collect();
            let mut batch_mask = Array2::from_elem((b, m), false);
            for (r, &i) in chunk.iter().enumerate() {
                for k in 0..m {
                    batch_mask[(r, k)] = set.mask[(i, k)];
                }
            }

            // Forward each modality: encoder -> head -> normalize.
            let mut caches = Vec::with_capacity(m);
            let mut zs = Vec::with_capacity(m);
            for k in 0..m {
                let (feat, enc_cache) = model.encoders[k].forward_cached(&batch_views[k]);
                let (raw, head_cache) = model.heads[k].forward_cached(&feat);
                let (z, norms) = normalize_rows(&raw);
                zs.push(z);
                caches.push((enc_cache, head_cache, raw, norms));
            }

            let (loss, grad_z) = weighted_contrastive_loss_with_grad(&LossBatch {
                embeddings: &zs,
                weights: &batch_weights,
                mask: &batch_mask,
                temperature: tau,
                mask_dummy_pairs: cfg.mask_dummy_pairs,
            })?;
            let loss_f = loss.to_f64_lossy();
            if !loss_f.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "pretrain".into(),
                    epoch,
                    lr: cfg.learning_rate,
                });
            }
            epoch_loss += loss_f;
            counted += b;

            // Backward; gradients scaled 1/B so the step size is batch-,
            // not batch-size-, dependent.
            let scale = num::<T>(1.0 / b as f64);
            for k in 0..m {
                let (enc_cache, head_cache, raw, norms) = &caches[k];
                let grad_raw = normalize_rows_backward(&grad_z[k], raw, norms);
                let (mut head_grads, grad_feat) = model.heads[k].backward(head_cache, &grad_raw);
                let (mut enc_grads, _) = model.encoders[k].backward(enc_cache, &grad_feat);
                head_grads.scale(scale);
                enc_grads.scale(scale);
                head_states[k].step(&mut model.heads[k], &head_grads, lr, momentum);
                enc_states[k].step(&mut model.encoders[k], &enc_grads, lr, momentum);
            }
        }
        report
            .loss_curve
            .push(if counted > 0 { epoch_loss / counted as f64 } else { 0.0 });
    }
    Ok(report)
}
