//! Pairing incomplete datasets through a shared modality: similarity
//! matrices, argmax / threshold / top-k matching, successive multi-dataset
//! binding, weight normalization, and pairing-quality scoring against
//! hidden ground truth.

pub(crate) mod format;

pub use format::{load_pseudo_paired, save_pseudo_paired};

use crate::corpus::{Dataset, ModalityId};
use crate::encoders::{encode, train_autoencoder, EncoderSpec, LabelEmbedder};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scalar::{num, Scalar};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pairwise cosine similarities between two embedding sets.
/// `values[j][k] = cos(e_j, e_k)`; zero-norm rows are treated as having
/// epsilon norm so every entry stays finite.
#[derive(Clone, Debug)]
pub struct SimilarityMatrix<T> {
    pub values: Array2<T>,
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Compute the full similarity matrix between row embeddings of `a` and `b`.
pub fn similarity_matrix<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> Result<SimilarityMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch {
            context: "similarity embeddings".into(),
            expected: vec![a.ncols()],
            actual: vec![b.ncols()],
        });
    }
    if a.ncols() == 0 {
        return Err(Error::validation("embeddings", "dimension must be >= 1"));
    }
    let eps = num::<T>(crate::encoders::NORM_EPSILON);
    let normalize = |m: &Array2<T>| -> Array2<T> {
        let mut out = m.to_owned();
        for mut row in out.rows_mut() {
            let norm = row.iter().map(|v| *v * *v).sum::<T>().sqrt();
            let scale = T::one() / norm.max(eps);
            row.mapv_inplace(|v| v * scale);
        }
        out
    };
    let values = normalize(a).dot(&normalize(b).t());
    Ok(SimilarityMatrix {
        row_ids: (0..a.nrows()).collect(),
        col_ids: (0..b.nrows()).collect(),
        values,
    })
}

/// Where a pseudo-paired sample's views came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub dataset: usize,
    pub index: usize,
}

/// Full-modality samples assembled by matching; structure-of-arrays.
/// `provenance[i][0]` is the anchor; later entries are matched contributors.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoPairedDataset {
    pub views: BTreeMap<ModalityId, Array2<f32>>,
    pub labels: Option<Vec<u32>>,
    pub similarities: Vec<f64>,
    pub provenance: Vec<Vec<SourceRef>>,
    pub num_classes: usize,
}

impl PseudoPairedDataset {
    pub fn len(&self) -> usize {
        self.similarities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.similarities.is_empty()
    }

    pub fn modalities(&self) -> impl Iterator<Item = &ModalityId> {
        self.views.keys()
    }

    /// Materialize as a plain dataset (no hidden labels: pseudo data stays
    /// out of evaluation paths).
    pub fn to_dataset(&self, name: &str, class_names: Vec<String>) -> Result<Dataset> {
        Dataset::new(
            name,
            self.views.clone(),
            self.labels.clone(),
            None,
            Vec::new(),
            self.num_classes,
            class_names,
        )
    }
}

/// How matches are selected from the similarity matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScheme {
    /// Highest-similarity match per sample, both directions.
    Top1,
    /// One pair per matrix entry with similarity >= theta.
    Threshold { theta: f64 },
    /// K best matches per sample, both directions.
    TopK { k: usize },
}

impl PairScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            PairScheme::Threshold { theta } if !(-1.0..=1.0).contains(theta) => Err(
                Error::validation("binding.scheme.theta", "must be in [-1, 1]"),
            ),
            PairScheme::TopK { k: 0 } => Err(Error::validation("binding.scheme.k", "must be >= 1")),
            _ => Ok(()),
        }
    }
}

/// One side of a binding step: views plus per-row provenance chains.
struct BindSide<'a> {
    views: &'a BTreeMap<ModalityId, Array2<f32>>,
    labels: Option<&'a [u32]>,
    provenance: Vec<Vec<SourceRef>>,
    name: &'a str,
}

impl<'a> BindSide<'a> {
    fn of_dataset(ds: &'a Dataset, dataset_idx: usize, views: &'a BTreeMap<ModalityId, Array2<f32>>) -> Self {
        BindSide {
            views,
            labels: ds.labels(),
            provenance: (0..ds.len())
                .map(|i| vec![SourceRef { dataset: dataset_idx, index: i }])
                .collect(),
            name: &ds.name,
        }
    }

    fn len(&self) -> usize {
        self.provenance.len()
    }
}

fn dataset_views(ds: &Dataset) -> BTreeMap<ModalityId, Array2<f32>> {
    ds.sensor_modalities()
        .map(|m| (m.clone(), ds.view(m).unwrap().clone()))
        .collect()
}

/// Row argmax with the lowest-index tie rule.
fn argmax_row<T: Scalar>(values: &Array2<T>, row: usize) -> usize {
    let mut best = 0;
    let mut best_v = values[(row, 0)];
    for k in 1..values.ncols() {
        if values[(row, k)] > best_v {
            best_v = values[(row, k)];
            best = k;
        }
    }
    best
}

fn argmax_col<T: Scalar>(values: &Array2<T>, col: usize) -> usize {
    let mut best = 0;
    let mut best_v = values[(0, col)];
    for j in 1..values.nrows() {
        if values[(j, col)] > best_v {
            best_v = values[(j, col)];
            best = j;
        }
    }
    best
}

/// Emitted pair: anchor row/col, matched row/col, similarity.
struct Match {
    anchor_is_row: bool,
    anchor: usize,
    matched: usize,
}

fn assemble<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    left: &BindSide<'_>,
    right: &BindSide<'_>,
    matches: &[Match],
    num_classes: usize,
) -> Result<PseudoPairedDataset> {
    // Union of modalities; the anchor side wins where both have a view.
    let mut out_views: BTreeMap<ModalityId, Array2<f32>> = BTreeMap::new();
    let n = matches.len();
    let mut all_mods: Vec<(ModalityId, usize)> = Vec::new();
    for (m, v) in left.views {
        all_mods.push((m.clone(), v.ncols()));
    }
    for (m, v) in right.views {
        if !left.views.contains_key(m) {
            all_mods.push((m.clone(), v.ncols()));
        } else if left.views[m].ncols() != v.ncols() {
            return Err(Error::ShapeMismatch {
                context: format!("shared modality '{m}' dims"),
                expected: vec![left.views[m].ncols()],
                actual: vec![v.ncols()],
            });
        }
    }
    for (m, dim) in &all_mods {
        out_views.insert(m.clone(), Array2::zeros((n, *dim)));
    }

    let mut similarities = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    let both_labeled = left.labels.is_some() && right.labels.is_some();
    let mut labels = both_labeled.then(Vec::new);

    for (i, m) in matches.iter().enumerate() {
        let (row, col) = if m.anchor_is_row {
            (m.anchor, m.matched)
        } else {
            (m.matched, m.anchor)
        };
        let (anchor_side, other_side, anchor_i, other_i) = if m.anchor_is_row {
            (left, right, row, col)
        } else {
            (right, left, col, row)
        };
        for (mod_id, arr) in out_views.iter_mut() {
            // Anchor contributes every modality it has; the matched side
            // fills in the rest.
            let (src, idx) = if anchor_side.views.contains_key(mod_id) {
                (&anchor_side.views[mod_id], anchor_i)
            } else {
                (&other_side.views[mod_id], other_i)
            };
            arr.row_mut(i).assign(&src.row(idx));
        }
        similarities.push(sim.values[(row, col)].to_f64_lossy());
        let mut prov = anchor_side.provenance[anchor_i].clone();
        prov.extend(other_side.provenance[other_i].iter().copied());
        provenance.push(prov);
        if let Some(labels) = labels.as_mut() {
            labels.push(anchor_side.labels.unwrap()[anchor_i]);
        }
    }

    Ok(PseudoPairedDataset {
        views: out_views,
        labels,
        similarities,
        provenance,
        num_classes,
    })
}

fn matches_for_scheme<T: Scalar>(sim: &SimilarityMatrix<T>, scheme: PairScheme) -> Vec<Match> {
    let (rows, cols) = (sim.nrows(), sim.ncols());
    match scheme {
        PairScheme::Top1 => {
            let mut out = Vec::with_capacity(rows + cols);
            for j in 0..rows {
                out.push(Match { anchor_is_row: true, anchor: j, matched: argmax_row(&sim.values, j) });
            }
            for k in 0..cols {
                out.push(Match { anchor_is_row: false, anchor: k, matched: argmax_col(&sim.values, k) });
            }
            out
        }
        PairScheme::Threshold { theta } => {
            let theta = num::<T>(theta);
            let mut out = Vec::new();
            for j in 0..rows {
                for k in 0..cols {
                    if sim.values[(j, k)] >= theta {
                        out.push(Match { anchor_is_row: true, anchor: j, matched: k });
                    }
                }
            }
            out
        }
        PairScheme::TopK { k } => {
            let mut out = Vec::new();
            for j in 0..rows {
                let mut idx: Vec<usize> = (0..cols).collect();
                idx.sort_by(|&a, &b| {
                    sim.values[(j, b)]
                        .partial_cmp(&sim.values[(j, a)])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                for &m in idx.iter().take(k) {
                    out.push(Match { anchor_is_row: true, anchor: j, matched: m });
                }
            }
            for c in 0..cols {
                let mut idx: Vec<usize> = (0..rows).collect();
                idx.sort_by(|&a, &b| {
                    sim.values[(b, c)]
                        .partial_cmp(&sim.values[(a, c)])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                for &m in idx.iter().take(k) {
                    out.push(Match { anchor_is_row: false, anchor: c, matched: m });
                }
            }
            out
        }
    }
}

fn pair_sides<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    left: &BindSide<'_>,
    right: &BindSide<'_>,
    scheme: PairScheme,
    num_classes: usize,
) -> Result<PseudoPairedDataset> {
    scheme.validate()?;
    if left.len() == 0 || right.len() == 0 {
        return Err(Error::EmptyInput(format!(
            "pairing '{}' with '{}'",
            left.name, right.name
        )));
    }
    if sim.nrows() != left.len() || sim.ncols() != right.len() {
        return Err(Error::ShapeMismatch {
            context: "similarity matrix vs dataset sizes".into(),
            expected: vec![left.len(), right.len()],
            actual: vec![sim.nrows(), sim.ncols()],
        });
    }
    let matches = matches_for_scheme(sim, scheme);
    assemble(sim, left, right, &matches, num_classes)
}

/// Argmax pairing, Eq.-(2) style: every sample of each dataset is matched
/// with its most similar counterpart on the other side (ties to the lowest
/// index; many-to-one allowed). Result size is exactly |D_A| + |D_B|.
pub fn pair_argmax<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    d_a: &Dataset,
    d_b: &Dataset,
) -> Result<PseudoPairedDataset> {
    pair_threshold(sim, d_a, d_b, PairScheme::Top1)
}

/// Pairing under any [`PairScheme`]; `Top1` is identical to [`pair_argmax`].
pub fn pair_threshold<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    d_a: &Dataset,
    d_b: &Dataset,
    scheme: PairScheme,
) -> Result<PseudoPairedDataset> {
    let va = dataset_views(d_a);
    let vb = dataset_views(d_b);
    let left = BindSide::of_dataset(d_a, 0, &va);
    let right = BindSide::of_dataset(d_b, 1, &vb);
    pair_sides(sim, &left, &right, scheme, d_a.num_classes)
}

/// Supplies shared-modality embeddings for one binding step.
pub trait SharedModalityEmbedder {
    fn embed_pair(
        &mut self,
        left: &PartialDataset<'_>,
        right: &PartialDataset<'_>,
        shared: &ModalityId,
    ) -> Result<(Array2<f64>, Array2<f64>)>;
}

/// Dataset-like view handed to embedders during binding: sensor views plus
/// (for label binding) rendered label texts. Never exposes ground truth.
pub struct PartialDataset<'a> {
    pub views: &'a BTreeMap<ModalityId, Array2<f32>>,
    pub label_texts: Option<Vec<String>>,
    pub name: String,
}

/// Embeds a shared sensor modality with an autoencoder trained on the union
/// of both sides' data for that modality.
pub struct AutoencoderEmbedder {
    pub spec: EncoderSpec,
    pub seed: u64,
}

impl SharedModalityEmbedder for AutoencoderEmbedder {
    fn embed_pair(
        &mut self,
        left: &PartialDataset<'_>,
        right: &PartialDataset<'_>,
        shared: &ModalityId,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let get = |side: &PartialDataset<'_>| -> Result<Array2<f64>> {
            side.views
                .get(shared)
                .map(|v| v.mapv(f64::from))
                .ok_or_else(|| Error::MissingSharedModality {
                    left: left.name.clone(),
                    right: right.name.clone(),
                    modality: shared.to_string(),
                })
        };
        let (la, rb) = (get(left)?, get(right)?);
        let mut union = Array2::zeros((la.nrows() + rb.nrows(), la.ncols()));
        union.slice_mut(ndarray::s![..la.nrows(), ..]).assign(&la);
        union.slice_mut(ndarray::s![la.nrows().., ..]).assign(&rb);
        let spec = self.spec.for_modality(shared.clone());
        let ae = train_autoencoder(&union, &spec, derive_seed(self.seed, shared.as_str()))?;
        Ok((encode(&ae.encoder, &la)?, encode(&ae.encoder, &rb)?))
    }
}

/// Embeds label texts through a [`LabelEmbedder`].
pub struct LabelTextEmbedder {
    pub embedder: Box<dyn LabelEmbedder>,
}

impl SharedModalityEmbedder for LabelTextEmbedder {
    fn embed_pair(
        &mut self,
        left: &PartialDataset<'_>,
        right: &PartialDataset<'_>,
        shared: &ModalityId,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        if !shared.is_label() {
            return Err(Error::validation(
                "binding.shared_modality",
                format!("label embedder cannot embed sensor modality '{shared}'"),
            ));
        }
        let texts = |side: &PartialDataset<'_>| {
            side.label_texts.clone().ok_or_else(|| Error::MissingSharedModality {
                left: left.name.clone(),
                right: right.name.clone(),
                modality: shared.to_string(),
            })
        };
        Ok((
            self.embedder.embed(&texts(left)?)?,
            self.embedder.embed(&texts(right)?)?,
        ))
    }
}

/// Bind two or more datasets by folding pairwise binding left to right,
/// carrying previously bound views forward. `selectors[i]` names the
/// modality shared between the running result and `datasets[i + 1]`; it may
/// differ per step. The final samples contain the union of all modalities.
pub fn bind_many(
    datasets: &[&Dataset],
    selectors: &[ModalityId],
    embedder: &mut dyn SharedModalityEmbedder,
    scheme: PairScheme,
    label_meta_keys: &[String],
) -> Result<PseudoPairedDataset> {
    if datasets.len() < 2 {
        return Err(Error::validation("datasets", "binding needs at least two datasets"));
    }
    if selectors.len() != datasets.len() - 1 {
        return Err(Error::validation(
            "selectors",
            format!("expected {} shared modalities, got {}", datasets.len() - 1, selectors.len()),
        ));
    }

    let label_texts = |ds: &Dataset| -> Result<Option<Vec<String>>> {
        match ds.labels() {
            Some(l) => Ok(Some(
                (0..l.len())
                    .map(|i| ds.label_text(i, label_meta_keys))
                    .collect::<Result<Vec<_>>>()?,
            )),
            None => Ok(None),
        }
    };

    let first_views = dataset_views(datasets[0]);
    let mut acc = PseudoPairedDataset {
        views: first_views,
        labels: datasets[0].labels().map(<[u32]>::to_vec),
        similarities: vec![1.0; datasets[0].len()],
        provenance: (0..datasets[0].len())
            .map(|i| vec![SourceRef { dataset: 0, index: i }])
            .collect(),
        num_classes: datasets[0].num_classes,
    };
    let mut acc_name = datasets[0].name.clone();
    let mut acc_texts = label_texts(datasets[0])?;

    for (step, right_ds) in datasets[1..].iter().enumerate() {
        let shared = &selectors[step];
        let left_has = shared.is_label() && acc.labels.is_some()
            || !shared.is_label() && acc.views.contains_key(shared);
        if !left_has || !right_ds.has_modality(shared) {
            return Err(Error::MissingSharedModality {
                left: acc_name.clone(),
                right: right_ds.name.clone(),
                modality: shared.to_string(),
            });
        }

        let left_part = PartialDataset {
            views: &acc.views,
            label_texts: acc_texts.clone(),
            name: acc_name.clone(),
        };
        let right_views = dataset_views(right_ds);
        let right_part = PartialDataset {
            views: &right_views,
            label_texts: label_texts(right_ds)?,
            name: right_ds.name.clone(),
        };
        let (e_l, e_r) = embedder.embed_pair(&left_part, &right_part, shared)?;
        let sim = similarity_matrix(&e_l, &e_r)?;

        let left = BindSide {
            views: &acc.views,
            labels: acc.labels.as_deref(),
            provenance: acc.provenance.clone(),
            name: &acc_name,
        };
        let right = BindSide::of_dataset(right_ds, step + 1, &right_views);
        let next = pair_sides(&sim, &left, &right, scheme, acc.num_classes)?;
        acc_name = format!("{acc_name}+{}", right_ds.name);
        acc_texts = match (&next.labels, &acc_texts) {
            (Some(_), Some(_)) => {
                // Rebuild anchor label texts for the folded result.
                let names = datasets[0].class_names.clone();
                Some(
                    next.labels
                        .as_ref()
                        .unwrap()
                        .iter()
                        .map(|&c| format!("class={}", names.get(c as usize).cloned().unwrap_or_else(|| format!("class_{c}"))))
                        .collect(),
                )
            }
            _ => None,
        };
        acc = next;
    }
    Ok(acc)
}

/// Weight-normalization modes for pseudo-pair similarities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightNorm {
    /// Divide clamped similarities by their maximum (best pair keeps
    /// weight 1).
    #[default]
    Max,
    /// Divide clamped similarities by their sum.
    Sum,
    /// Clamp only.
    None,
}

/// Map pairing similarities to loss weights in [0, 1]. Negative
/// similarities clamp to 0 first; if no similarity is positive, every
/// weight falls back to 1 (uniform).
pub fn normalize_weights(similarities: &[f64], mode: WeightNorm) -> Vec<f64> {
    if similarities.is_empty() {
        return Vec::new();
    }
    let clamped: Vec<f64> = similarities.iter().map(|a| a.clamp(0.0, 1.0)).collect();
    let max = clamped.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![1.0; similarities.len()];
    }
    match mode {
        WeightNorm::Max => clamped.iter().map(|c| c / max).collect(),
        WeightNorm::Sum => {
            let sum: f64 = clamped.iter().sum();
            clamped.iter().map(|c| c / sum).collect()
        }
        WeightNorm::None => clamped,
    }
}

/// Pairing-quality report: fraction of matched links whose two source
/// samples share the hidden class, plus a class-by-class confusion count
/// (anchor class x matched class).
#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub accuracy: f64,
    pub links: usize,
    pub confusion: Vec<Vec<u64>>,
}

/// Score a pseudo-paired dataset against the hidden ground truth of its
/// source datasets (indexed by `SourceRef::dataset`).
pub fn pairing_accuracy(
    pseudo: &PseudoPairedDataset,
    sources: &[&Dataset],
) -> Result<PairingReport> {
    if pseudo.is_empty() {
        return Err(Error::EmptyInput("pseudo-paired dataset".into()));
    }
    let gt: Vec<&[u32]> = sources
        .iter()
        .map(|d| d.hidden_labels())
        .collect::<Result<Vec<_>>>()?;
    let classes = pseudo.num_classes;
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut links = 0usize;
    let mut same = 0usize;
    for prov in &pseudo.provenance {
        let anchor = prov[0];
        let ya = *gt
            .get(anchor.dataset)
            .and_then(|l| l.get(anchor.index))
            .ok_or_else(|| Error::MissingGroundTruth(format!("source {anchor:?}")))?;
        for other in &prov[1..] {
            let yb = *gt
                .get(other.dataset)
                .and_then(|l| l.get(other.index))
                .ok_or_else(|| Error::MissingGroundTruth(format!("source {other:?}")))?;
            confusion[ya as usize][yb as usize] += 1;
            links += 1;
            if ya == yb {
                same += 1;
            }
        }
    }
    Ok(PairingReport {
        accuracy: same as f64 / links as f64,
        links,
        confusion,
    })
}
