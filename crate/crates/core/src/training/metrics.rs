//! Evaluation under arbitrary modality masks: accuracy, macro F1, and
//! per-class metrics from the confusion matrix.

use super::finetune::model_inputs;
use super::model::MultimodalModel;
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Compute accuracy / macro F1 / per-class metrics from a confusion matrix.
/// Classes with no predictions and no support get F1 = 0 by convention.
pub fn metrics_from_confusion(confusion: &[Vec<u64>]) -> (f64, f64, Vec<ClassMetrics>) {
    let classes = confusion.len();
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..classes).map(|c| confusion[c][c]).sum();
    let mut per_class = Vec::with_capacity(classes);
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = (0..classes).map(|r| confusion[r][c]).sum();
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp as f64 / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let accuracy = if total > 0 { correct as f64 / total as f64 } else { 0.0 };
    (accuracy, f1_sum / classes.max(1) as f64, per_class)
}

/// Evaluate on a labeled test set. Modalities outside the mask (or missing
/// from the data) are fed as zero dummies.
pub fn evaluate<T: Scalar>(
    model: &MultimodalModel<T>,
    data: &Dataset,
    modality_mask: Option<&[bool]>,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyInput(format!("test set '{}'", data.name)));
    }
    let labels = data
        .labels()
        .ok_or_else(|| Error::validation("evaluate", format!("dataset '{}' has no labels", data.name)))?;
    let classifier = model
        .classifier
        .as_ref()
        .ok_or_else(|| Error::validation("evaluate", "model has no trained classifier"))?;
    let (views, mask) = model_inputs(model, data, modality_mask)?;
    let feats: Vec<_> = (0..model.num_modalities())
        .map(|k| model.encoders[k].forward(&views[k]))
        .collect();
    let logits = classifier.forward(&model.classifier_input(&feats, &mask));

    let classes = model.spec.num_classes;
    let mut confusion = vec![vec![0u64; classes]; classes];
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        confusion[y as usize][pred] += 1;
    }
    let (accuracy, macro_f1, per_class) = metrics_from_confusion(&confusion);
    Ok(EvalReport {
        accuracy,
        macro_f1,
        per_class,
        confusion,
    })
}
