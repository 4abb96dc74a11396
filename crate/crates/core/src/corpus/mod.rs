//! Synthetic multimodal corpora with known ground truth, plus the in-memory
//! dataset model used by every downstream stage.
//!
//! The generative model is linear-Gaussian: each class draws a latent center,
//! each dataset draws a domain offset, each sample draws an optional latent
//! jitter, and each modality observes the latent through a fixed random
//! linear map plus Gaussian noise scaled by `1 / snr`. A modality with
//! `snr = 0` is pure noise and carries no class information.

pub(crate) mod format;

pub use format::{load_corpus, load_dataset, save_corpus, save_dataset, LoadOptions};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Reserved name of the class-label pseudo-modality.
pub const LABEL_MODALITY: &str = "label";

/// Short identifier of a modality ("acc", "gyro", "skel", or "label").
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModalityId(String);

impl ModalityId {
    pub fn new(name: impl Into<String>) -> Self {
        ModalityId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_label(&self) -> bool {
        self.0 == LABEL_MODALITY
    }
}

impl From<&str> for ModalityId {
    fn from(s: &str) -> Self {
        ModalityId::new(s)
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One sensor modality of the synthetic corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalityDef {
    pub name: ModalityId,
    pub dim: usize,
}

/// One incomplete dataset the generator should emit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub size: usize,
    /// Modalities present in every sample; may include "label".
    pub modalities: Vec<ModalityId>,
    /// Scale of this dataset's domain offset in latent space.
    #[serde(default)]
    pub domain_shift: f64,
}

fn default_class_separation() -> f64 {
    1.0
}

fn default_finetune_size() -> usize {
    500
}

fn default_test_size() -> usize {
    1000
}

/// Declarative description of a synthetic corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub num_classes: usize,
    pub modalities: Vec<ModalityDef>,
    pub latent_dim: usize,
    #[serde(default = "default_class_separation")]
    pub class_separation: f64,
    /// Per-sample latent spread around the class center (0 = class-pure).
    #[serde(default)]
    pub sample_jitter: f64,
    /// Discriminativeness knob per modality; snr = 0 means pure noise.
    #[serde(default)]
    pub modality_snr: BTreeMap<ModalityId, f64>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_finetune_size")]
    pub finetune_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Naturally paired pool for the upper bound; 0 means "sum of dataset sizes".
    #[serde(default)]
    pub paired_pool_size: usize,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
    pub seed: u64,
}

const DEFAULT_SNR: f64 = 10.0;

impl CorpusSpec {
    pub fn snr(&self, modality: &ModalityId) -> f64 {
        self.modality_snr.get(modality).copied().unwrap_or(DEFAULT_SNR)
    }

    pub fn modality_dim(&self, modality: &ModalityId) -> Option<usize> {
        self.modalities.iter().find(|m| &m.name == modality).map(|m| m.dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::validation("num_classes", "must be >= 1"));
        }
        if self.latent_dim == 0 {
            return Err(Error::validation("latent_dim", "must be >= 1"));
        }
        if self.class_separation < 0.0 {
            return Err(Error::validation("class_separation", "must be >= 0"));
        }
        if self.sample_jitter < 0.0 {
            return Err(Error::validation("sample_jitter", "must be >= 0"));
        }
        if self.modalities.is_empty() {
            return Err(Error::validation("modalities", "at least one modality required"));
        }
        let mut names = BTreeSet::new();
        for (i, m) in self.modalities.iter().enumerate() {
            if m.dim == 0 {
                return Err(Error::validation(format!("modalities[{i}].dim"), "must be >= 1"));
            }
            if m.name.is_label() {
                return Err(Error::validation(
                    format!("modalities[{i}].name"),
                    "'label' is reserved for the class-label pseudo-modality",
                ));
            }
            if !names.insert(m.name.clone()) {
                return Err(Error::validation(
                    format!("modalities[{i}].name"),
                    format!("duplicate modality '{}'", m.name),
                ));
            }
        }
        for (name, snr) in &self.modality_snr {
            if *snr < 0.0 {
                return Err(Error::validation(format!("modality_snr.{name}"), "must be >= 0"));
            }
        }
        if self.datasets.is_empty() {
            return Err(Error::validation("datasets", "at least one dataset required"));
        }
        for (k, ds) in self.datasets.iter().enumerate() {
            if ds.size < self.num_classes {
                return Err(Error::validation(
                    format!("datasets[{k}].size"),
                    format!("must be >= num_classes ({})", self.num_classes),
                ));
            }
            if ds.domain_shift < 0.0 {
                return Err(Error::validation(format!("datasets[{k}].domain_shift"), "must be >= 0"));
            }
            if ds.modalities.is_empty() {
                return Err(Error::validation(format!("datasets[{k}].modalities"), "must be non-empty"));
            }
            for m in &ds.modalities {
                if !m.is_label() && !names.contains(m) {
                    return Err(Error::validation(
                        format!("datasets[{k}].modalities"),
                        format!("unknown modality '{m}'"),
                    ));
                }
            }
        }
        if let Some(cn) = &self.class_names {
            if cn.len() != self.num_classes {
                return Err(Error::validation(
                    "class_names",
                    format!("expected {} names, got {}", self.num_classes, cn.len()),
                ));
            }
        }
        if self.finetune_size < self.num_classes {
            return Err(Error::validation("finetune_size", "must be >= num_classes"));
        }
        if self.test_size < self.num_classes {
            return Err(Error::validation("test_size", "must be >= num_classes"));
        }
        Ok(())
    }

    pub fn class_name(&self, class: u32) -> String {
        match &self.class_names {
            Some(names) => names[class as usize].clone(),
            None => format!("class_{class}"),
        }
    }
}

/// An ordered collection of samples sharing one modality set.
///
/// Hidden ground-truth labels ride along for evaluation only; the binding
/// and training paths never read them (the loader keeps them out unless
/// explicitly requested).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    views: BTreeMap<ModalityId, Array2<f32>>,
    labels: Option<Vec<u32>>,
    hidden_labels: Option<Vec<u32>>,
    pub meta: Vec<BTreeMap<String, String>>,
    pub num_classes: usize,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        views: BTreeMap<ModalityId, Array2<f32>>,
        labels: Option<Vec<u32>>,
        hidden_labels: Option<Vec<u32>>,
        meta: Vec<BTreeMap<String, String>>,
        num_classes: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        let mut len: Option<usize> = None;
        for (m, v) in &views {
            match len {
                None => len = Some(v.nrows()),
                Some(n) if n != v.nrows() => {
                    return Err(Error::ShapeMismatch {
                        context: format!("dataset '{name}' modality '{m}'"),
                        expected: vec![n],
                        actual: vec![v.nrows()],
                    })
                }
                _ => {}
            }
        }
        let n = len.unwrap_or_else(|| labels.as_ref().map_or(0, Vec::len));
        for (what, l) in [("labels", &labels), ("ground truth", &hidden_labels)] {
            if let Some(l) = l {
                if l.len() != n {
                    return Err(Error::ShapeMismatch {
                        context: format!("dataset '{name}' {what}"),
                        expected: vec![n],
                        actual: vec![l.len()],
                    });
                }
                if let Some(bad) = l.iter().find(|&&y| y as usize >= num_classes) {
                    return Err(Error::validation(
                        format!("dataset '{name}' {what}"),
                        format!("label {bad} out of range [0, {num_classes})"),
                    ));
                }
            }
        }
        if !meta.is_empty() && meta.len() != n {
            return Err(Error::ShapeMismatch {
                context: format!("dataset '{name}' meta"),
                expected: vec![n],
                actual: vec![meta.len()],
            });
        }
        Ok(Dataset {
            name,
            views,
            labels,
            hidden_labels,
            meta,
            num_classes,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.views
            .values()
            .next()
            .map(Array2::nrows)
            .unwrap_or_else(|| self.labels.as_ref().map_or(0, Vec::len))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Modalities present in every sample, including "label" when visible
    /// labels are attached.
    pub fn modality_set(&self) -> BTreeSet<ModalityId> {
        let mut set: BTreeSet<ModalityId> = self.views.keys().cloned().collect();
        if self.labels.is_some() {
            set.insert(ModalityId::new(LABEL_MODALITY));
        }
        set
    }

    pub fn sensor_modalities(&self) -> impl Iterator<Item = &ModalityId> {
        self.views.keys()
    }

    pub fn has_modality(&self, m: &ModalityId) -> bool {
        if m.is_label() {
            self.labels.is_some()
        } else {
            self.views.contains_key(m)
        }
    }

    pub fn view(&self, m: &ModalityId) -> Result<&Array2<f32>> {
        self.views.get(m).ok_or_else(|| Error::validation(
            "modality",
            format!("dataset '{}' has no modality '{m}'", self.name),
        ))
    }

    /// Copy of one modality's data at the requested scalar precision.
    pub fn view_as<T: Scalar>(&self, m: &ModalityId) -> Result<Array2<T>> {
        Ok(self.view(m)?.mapv(|v| T::from_f32(v).unwrap()))
    }

    pub fn dim(&self, m: &ModalityId) -> Result<usize> {
        Ok(self.view(m)?.ncols())
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Evaluation-only ground truth. Binding and training must not call this.
    pub fn hidden_labels(&self) -> Result<&[u32]> {
        self.hidden_labels
            .as_deref()
            .ok_or_else(|| Error::MissingGroundTruth(format!("dataset '{}'", self.name)))
    }

    pub fn has_hidden_labels(&self) -> bool {
        self.hidden_labels.is_some()
    }

    pub(crate) fn labels_raw(&self) -> Option<&Vec<u32>> {
        self.labels.as_ref()
    }

    pub(crate) fn hidden_labels_raw(&self) -> Option<&Vec<u32>> {
        self.hidden_labels.as_ref()
    }

    pub fn class_name(&self, class: u32) -> String {
        self.class_names
            .get(class as usize)
            .cloned()
            .unwrap_or_else(|| format!("class_{class}"))
    }

    /// Text rendering of sample `i`'s label, optionally augmented with
    /// structured metadata fields ("class=walking; env=indoor").
    pub fn label_text(&self, i: usize, meta_keys: &[String]) -> Result<String> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::validation("labels", format!("dataset '{}' has no labels", self.name)))?;
        let mut text = format!("class={}", self.class_name(labels[i]));
        for key in meta_keys {
            if let Some(v) = self.meta.get(i).and_then(|m| m.get(key)) {
                text.push_str(&format!("; {key}={v}"));
            }
        }
        Ok(text)
    }

    /// Project onto a modality subset ("label" keeps the visible labels).
    pub fn project(&self, modalities: &[ModalityId]) -> Result<Dataset> {
        let mut views = BTreeMap::new();
        let mut keep_label = false;
        for m in modalities {
            if m.is_label() {
                if self.labels.is_none() {
                    return Err(Error::validation(
                        "modalities",
                        format!("dataset '{}' has no labels to project", self.name),
                    ));
                }
                keep_label = true;
            } else {
                views.insert(m.clone(), self.view(m)?.clone());
            }
        }
        Dataset::new(
            self.name.clone(),
            views,
            if keep_label { self.labels.clone() } else { None },
            self.hidden_labels.clone(),
            self.meta.clone(),
            self.num_classes,
            self.class_names.clone(),
        )
    }

    /// Row subset in the given index order.
    pub fn take(&self, indices: &[usize], name: impl Into<String>) -> Result<Dataset> {
        let pick_rows = |a: &Array2<f32>| {
            let mut out = Array2::<f32>::zeros((indices.len(), a.ncols()));
            for (r, &i) in indices.iter().enumerate() {
                out.row_mut(r).assign(&a.row(i));
            }
            out
        };
        let views = self.views.iter().map(|(m, a)| (m.clone(), pick_rows(a))).collect();
        let pick = |l: &Option<Vec<u32>>| l.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        let meta = if self.meta.is_empty() {
            Vec::new()
        } else {
            indices.iter().map(|&i| self.meta[i].clone()).collect()
        };
        Dataset::new(
            name,
            views,
            pick(&self.labels),
            pick(&self.hidden_labels),
            meta,
            self.num_classes,
            self.class_names.clone(),
        )
    }

    /// Drop visible labels (keeps hidden ground truth).
    pub fn without_labels(mut self) -> Dataset {
        self.labels = None;
        self
    }

}

/// Everything `generate_corpus` emits.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub spec: CorpusSpec,
    /// The declared incomplete datasets (unlabeled unless "label" is in
    /// their modality set; ground truth hidden inside).
    pub incomplete: Vec<Dataset>,
    /// Small labeled, fully-paired set for supervised fine-tuning.
    pub finetune: Dataset,
    /// Large labeled, fully-paired held-out test set.
    pub test: Dataset,
    /// Naturally paired (unlabeled) pool for the upper bound.
    pub paired_pool: Dataset,
}

struct LatentModel {
    centers: Array2<f64>,
    maps: BTreeMap<ModalityId, Array2<f64>>,
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn normal_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((rows, cols));
    for v in a.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    a
}

impl LatentModel {
    fn draw(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Self {
        let centers = normal_mat(rng, spec.num_classes, spec.latent_dim) * spec.class_separation;
        let scale = 1.0 / (spec.latent_dim as f64).sqrt();
        let maps = spec
            .modalities
            .iter()
            .map(|m| (m.name.clone(), normal_mat(rng, m.dim, spec.latent_dim) * scale))
            .collect();
        LatentModel { centers, maps }
    }
}

/// Stratified label assignment: round-robin over classes, then a seeded
/// shuffle of the sample order.
fn balanced_labels(n: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut labels: Vec<u32> = (0..n).map(|i| (i % num_classes) as u32).collect();
    labels.shuffle(rng);
    labels
}

fn synth_views(
    model: &LatentModel,
    spec: &CorpusSpec,
    modalities: &[ModalityId],
    labels: &[u32],
    offset: &Array1<f64>,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<ModalityId, Array2<f32>> {
    let n = labels.len();
    let latents: Vec<Array1<f64>> = labels
        .iter()
        .map(|&y| {
            let mut z = model.centers.row(y as usize).to_owned() + offset;
            if spec.sample_jitter > 0.0 {
                z = z + normal_vec(rng, spec.latent_dim) * spec.sample_jitter;
            }
            z
        })
        .collect();
    let mut out = BTreeMap::new();
    for m in modalities {
        if m.is_label() {
            continue;
        }
        let dim = spec.modality_dim(m).expect("validated modality");
        let snr = spec.snr(m);
        let mut view = Array2::<f32>::zeros((n, dim));
        for (i, z) in latents.iter().enumerate() {
            let row = if snr == 0.0 {
                normal_vec(rng, dim)
            } else {
                model.maps[m].dot(z) + normal_vec(rng, dim) / snr
            };
            for (j, v) in row.iter().enumerate() {
                view[(i, j)] = *v as f32;
            }
        }
        out.insert(m.clone(), view);
    }
    out
}

fn base_meta(dataset: &str, n: usize) -> Vec<BTreeMap<String, String>> {
    (0..n)
        .map(|_| BTreeMap::from([(String::from("dataset"), dataset.to_string())]))
        .collect()
}

/// Generate the declared incomplete datasets plus labeled fine-tune, test,
/// and naturally-paired hold-out sets. Deterministic per seed.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let class_names: Vec<String> = (0..spec.num_classes as u32).map(|c| spec.class_name(c)).collect();
    let all_modalities: Vec<ModalityId> = spec.modalities.iter().map(|m| m.name.clone()).collect();

    let mut model_rng = seeded(derive_seed(spec.seed, "latent-model"));
    let model = LatentModel::draw(spec, &mut model_rng);

    let mut incomplete = Vec::with_capacity(spec.datasets.len());
    for (k, ds) in spec.datasets.iter().enumerate() {
        let name = ds.name.clone().unwrap_or_else(|| format!("d{k}"));
        let mut rng = seeded(derive_seed(spec.seed, &format!("dataset-{k}")));
        let offset = normal_vec(&mut rng, spec.latent_dim) * ds.domain_shift;
        let labels = balanced_labels(ds.size, spec.num_classes, &mut rng);
        let views = synth_views(&model, spec, &ds.modalities, &labels, &offset, &mut rng);
        let visible = ds.modalities.iter().any(ModalityId::is_label);
        incomplete.push(Dataset::new(
            &name,
            views,
            visible.then(|| labels.clone()),
            Some(labels),
            base_meta(&name, ds.size),
            spec.num_classes,
            class_names.clone(),
        )?);
    }

    let zero_offset = Array1::zeros(spec.latent_dim);
    let full_set = |tag: &str, n: usize, visible: bool| -> Result<Dataset> {
        let mut rng = seeded(derive_seed(spec.seed, tag));
        let labels = balanced_labels(n, spec.num_classes, &mut rng);
        let views = synth_views(&model, spec, &all_modalities, &labels, &zero_offset, &mut rng);
        Dataset::new(
            tag,
            views,
            visible.then(|| labels.clone()),
            Some(labels),
            base_meta(tag, n),
            spec.num_classes,
            class_names.clone(),
        )
    };

    let finetune = full_set("finetune", spec.finetune_size, true)?;
    let test = full_set("test", spec.test_size, true)?;

    // The upper-bound pool mirrors the incomplete data: one block per
    // declared dataset, same size and domain offset, but fully paired.
    let pool_total: usize = if spec.paired_pool_size > 0 {
        spec.paired_pool_size
    } else {
        spec.datasets.iter().map(|d| d.size).sum()
    };
    let mut pool_views: BTreeMap<ModalityId, Vec<Array2<f32>>> = BTreeMap::new();
    let mut pool_labels = Vec::new();
    let mut remaining = pool_total;
    for (k, ds) in spec.datasets.iter().enumerate() {
        let share = if k + 1 == spec.datasets.len() {
            remaining
        } else {
            ((ds.size as f64 / spec.datasets.iter().map(|d| d.size).sum::<usize>() as f64)
                * pool_total as f64)
                .round() as usize
        };
        let share = share.min(remaining);
        remaining -= share;
        if share == 0 {
            continue;
        }
        let mut rng = seeded(derive_seed(spec.seed, &format!("paired-pool-{k}")));
        let offset = normal_vec(&mut rng, spec.latent_dim) * ds.domain_shift;
        let labels = balanced_labels(share, spec.num_classes, &mut rng);
        let views = synth_views(&model, spec, &all_modalities, &labels, &offset, &mut rng);
        for (m, v) in views {
            pool_views.entry(m).or_default().push(v);
        }
        pool_labels.extend(labels);
    }
    let stacked: BTreeMap<ModalityId, Array2<f32>> = pool_views
        .into_iter()
        .map(|(m, parts)| {
            let rows: usize = parts.iter().map(Array2::nrows).sum();
            let cols = parts[0].ncols();
            let mut a = Array2::<f32>::zeros((rows, cols));
            let mut at = 0;
            for p in parts {
                a.slice_mut(ndarray::s![at..at + p.nrows(), ..]).assign(&p);
                at += p.nrows();
            }
            (m, a)
        })
        .collect();
    let n_pool = pool_labels.len();
    let paired_pool = Dataset::new(
        "paired_pool",
        stacked,
        None,
        Some(pool_labels),
        base_meta("paired_pool", n_pool),
        spec.num_classes,
        class_names,
    )?;

    Ok(Corpus {
        spec: spec.clone(),
        incomplete,
        finetune,
        test,
        paired_pool,
    })
}

/// Partition a fully-paired dataset into disjoint incomplete datasets, each
/// projected onto its modality set, with per-class balance within ±1.
///
/// Assignment is a stratified round-robin: within each class, samples are
/// dealt to parts one at a time until each part reaches its share.
pub fn split_complete_dataset(
    full: &Dataset,
    modality_sets: &[Vec<ModalityId>],
    fractions: &[f64],
) -> Result<Vec<Dataset>> {
    if modality_sets.len() != fractions.len() {
        return Err(Error::validation(
            "fractions",
            format!(
                "expected one fraction per modality set ({}), got {}",
                modality_sets.len(),
                fractions.len()
            ),
        ));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::validation("fractions", format!("sum {total} exceeds 1")));
    }
    if fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::validation("fractions", "must be non-negative"));
    }
    let full_set = full.modality_set();
    for (i, ms) in modality_sets.iter().enumerate() {
        for m in ms {
            if !full_set.contains(m) {
                return Err(Error::validation(
                    format!("modality_sets[{i}]"),
                    format!("modality '{m}' not in source dataset"),
                ));
            }
        }
    }

    // Group sample indices by class (single pseudo-class when unlabeled).
    let class_of: Box<dyn Fn(usize) -> u32> = match full.labels() {
        Some(l) => Box::new(move |i| l[i]),
        None => Box::new(|_| 0),
    };
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for i in 0..full.len() {
        by_class.entry(class_of(i)).or_default().push(i);
    }

    let parts = fractions.len();
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for indices in by_class.values() {
        let n = indices.len() as f64;
        // Largest-remainder share per part, then literal round-robin dealing.
        let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n).floor() as usize).collect();
        let mut rems: Vec<(usize, f64)> = fractions
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f * n - (f * n).floor()))
            .collect();
        rems.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let target: usize = (total * n).round() as usize;
        let mut short = target.saturating_sub(counts.iter().sum::<usize>());
        for (i, _) in rems {
            if short == 0 {
                break;
            }
            counts[i] += 1;
            short -= 1;
        }
        let mut cursor = indices.iter().copied();
        let mut left = counts.clone();
        while left.iter().any(|&c| c > 0) {
            for (p, l) in left.iter_mut().enumerate() {
                if *l > 0 {
                    if let Some(i) = cursor.next() {
                        assigned[p].push(i);
                        *l -= 1;
                    } else {
                        *l = 0;
                    }
                }
            }
        }
    }

    let mut out = Vec::with_capacity(parts);
    for (p, (ms, idx)) in modality_sets.iter().zip(&mut assigned).enumerate() {
        idx.sort_unstable();
        let part = full
            .take(idx, format!("{}_part{p}", full.name))?
            .project(ms)?;
        out.push(part);
    }
    Ok(out)
}

/// Labeled stratified subset covering `fraction` of the dataset.
pub fn stratified_fraction(data: &Dataset, fraction: f64, name: &str) -> Result<Dataset> {
    let all: Vec<ModalityId> = data.modality_set().into_iter().collect();
    let mut parts = split_complete_dataset(data, &[all], &[fraction])?;
    let mut out = parts.remove(0);
    out.name = name.to_string();
    Ok(out)
}
