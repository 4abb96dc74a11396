//! Stage two: aggregate heterogeneous samples into one training set, run
//! weighted contrastive pre-training, fine-tune with labels, and evaluate
//! under arbitrary modality masks.

pub mod finetune;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod pretrain;

pub use finetune::{finetune, FinetuneConfig, FinetuneMode, FinetuneReport};
pub use loss::{weighted_contrastive_loss, weighted_contrastive_loss_with_grad, LossBatch};
pub use metrics::{evaluate, ClassMetrics, EvalReport};
pub use model::{load_model, save_model, ModelSpec, MultimodalModel};
pub use pretrain::{pretrain, PretrainReport};

use crate::binding::{normalize_weights, PseudoPairedDataset, WeightNorm};
use crate::corpus::{Dataset, ModalityId};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

fn default_temperature() -> f64 {
    0.07
}

fn default_batch_size() -> usize {
    64
}

fn default_epochs() -> usize {
    100
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_momentum() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

/// Hyperparameters of the contrastive pre-training stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_true")]
    pub mask_dummy_pairs: bool,
    #[serde(default)]
    pub weight_norm: WeightNorm,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            temperature: default_temperature(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            mask_dummy_pairs: true,
            weight_norm: WeightNorm::Max,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(Error::validation("training.temperature", "must be > 0"));
        }
        if self.batch_size < 2 {
            return Err(Error::validation("training.batch_size", "must be >= 2"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::validation("training.learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("training.momentum", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Union of dummy-padded incomplete samples and pseudo-paired samples.
/// Dummy views are exact zero tensors; the mask records authenticity.
#[derive(Clone, Debug)]
pub struct AggregatedTrainingSet {
    pub modalities: Vec<ModalityId>,
    pub dims: Vec<usize>,
    /// Per modality, `[N x dim]`; zero rows where the modality is absent.
    pub views: Vec<Array2<f32>>,
    /// `[N x M]` sensor presence.
    pub mask: Array2<bool>,
    /// Visible-label presence per sample (the label pseudo-modality bit).
    pub label_present: Vec<bool>,
    pub weights: Vec<f64>,
    /// Visible labels where every contributing sample carries one.
    pub labels: Option<Vec<u32>>,
    pub num_classes: usize,
}

impl AggregatedTrainingSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Build the aggregated set from the original incomplete datasets plus the
/// pseudo-paired data. Incomplete and naturally paired samples carry weight
/// 1; pseudo samples carry their normalized pairing similarity.
pub fn build_training_set(
    incomplete: &[&Dataset],
    pseudo: Option<&PseudoPairedDataset>,
    modalities: &[(ModalityId, usize)],
    weight_norm: WeightNorm,
) -> Result<AggregatedTrainingSet> {
    let total: usize = incomplete.iter().map(|d| d.len()).sum::<usize>()
        + pseudo.map_or(0, PseudoPairedDataset::len);
    if total == 0 {
        return Err(Error::EmptyInput("aggregated training set".into()));
    }
    let m = modalities.len();
    let mut views: Vec<Array2<f32>> = modalities
        .iter()
        .map(|(_, dim)| Array2::zeros((total, *dim)))
        .collect();
    let mut mask = Array2::from_elem((total, m), false);
    let mut label_present = vec![false; total];
    let mut weights = Vec::with_capacity(total);
    let mut labels: Vec<Option<u32>> = Vec::with_capacity(total);
    let mut num_classes = 0usize;

    let mut at = 0usize;
    let mut append = |views_in: &std::collections::BTreeMap<ModalityId, Array2<f32>>,
                      n: usize,
                      sample_labels: Option<&[u32]>,
                      sample_weights: &[f64],
                      views: &mut Vec<Array2<f32>>,
                      mask: &mut Array2<bool>,
                      label_present: &mut Vec<bool>,
                      weights: &mut Vec<f64>,
                      labels: &mut Vec<Option<u32>>|
     -> Result<()> {
        for (k, (mod_id, dim)) in modalities.iter().enumerate() {
            if let Some(v) = views_in.get(mod_id) {
                if v.ncols() != *dim {
                    return Err(Error::ShapeMismatch {
                        context: format!("aggregate modality '{mod_id}'"),
                        expected: vec![*dim],
                        actual: vec![v.ncols()],
                    });
                }
                views[k]
                    .slice_mut(ndarray::s![at..at + n, ..])
                    .assign(v);
                for i in 0..n {
                    mask[(at + i, k)] = true;
                }
            }
        }
        for i in 0..n {
            let present: usize = (0..m).filter(|&k| mask[(at + i, k)]).count();
            let has_label = sample_labels.is_some();
            label_present[at + i] = has_label;
            if present + usize::from(has_label) < 2 {
                return Err(Error::validation(
                    "aggregate",
                    "every sample needs at least two present modalities (label included)",
                ));
            }
            labels.push(sample_labels.map(|l| l[i]));
        }
        weights.extend_from_slice(sample_weights);
        at += n;
        Ok(())
    };

    for ds in incomplete {
        let ds_views: std::collections::BTreeMap<ModalityId, Array2<f32>> = ds
            .sensor_modalities()
            .map(|mod_id| (mod_id.clone(), ds.view(mod_id).unwrap().clone()))
            .collect();
        num_classes = num_classes.max(ds.num_classes);
        append(
            &ds_views,
            ds.len(),
            ds.labels(),
            &vec![1.0; ds.len()],
            &mut views,
            &mut mask,
            &mut label_present,
            &mut weights,
            &mut labels,
        )?;
    }
    if let Some(p) = pseudo {
        num_classes = num_classes.max(p.num_classes);
        let w = normalize_weights(&p.similarities, weight_norm);
        append(
            &p.views,
            p.len(),
            p.labels.as_deref(),
            &w,
            &mut views,
            &mut mask,
            &mut label_present,
            &mut weights,
            &mut labels,
        )?;
    }

    let all_labeled = labels.iter().all(Option::is_some);
    Ok(AggregatedTrainingSet {
        modalities: modalities.iter().map(|(mod_id, _)| mod_id.clone()).collect(),
        dims: modalities.iter().map(|(_, dim)| *dim).collect(),
        views,
        mask,
        label_present,
        weights,
        labels: all_labeled.then(|| labels.into_iter().map(Option::unwrap).collect()),
        num_classes,
    })
}
