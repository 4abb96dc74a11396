//! The comparison methods behind one trainer interface, so experiment
//! configs can swap methods freely. Each trainer receives only the data its
//! method is allowed to see: the lower bound never sees incomplete data,
//! DCM and the model-binding baseline never see pseudo pairs, the upper
//! bound sees only the naturally paired pool.

use crate::binding::{
    bind_many, pairing_accuracy, AutoencoderEmbedder, LabelTextEmbedder, PairScheme,
    PairingReport, PseudoPairedDataset, SharedModalityEmbedder, WeightNorm,
};
use crate::corpus::{Corpus, Dataset, ModalityId};
use crate::encoders::{train_autoencoder, EncoderSpec, LabelEmbeddingProvider, Mlp};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scalar::{num, Scalar};
use crate::training::{
    build_training_set, finetune, pretrain, AggregatedTrainingSet, ContrastiveConfig,
    FinetuneConfig, ModelSpec, MultimodalModel, PretrainReport,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Method selector. `mmbind_c1` and `mmbind_c1c2` are the ablation stages
/// (pseudo pairs only; plus heterogeneous aggregation; the full method adds
/// similarity weighting).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    LowerBound,
    Unimodal,
    Mim,
    Mpm,
    Cmg,
    Dcm,
    ImageBind,
    Mmbind,
    MmbindC1,
    MmbindC1C2,
    UpperBound,
}

impl MethodId {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::LowerBound => "lower_bound",
            MethodId::Unimodal => "unimodal",
            MethodId::Mim => "mim",
            MethodId::Mpm => "mpm",
            MethodId::Cmg => "cmg",
            MethodId::Dcm => "dcm",
            MethodId::ImageBind => "imagebind",
            MethodId::Mmbind => "mmbind",
            MethodId::MmbindC1 => "mmbind_c1",
            MethodId::MmbindC1C2 => "mmbind_c1c2",
            MethodId::UpperBound => "upper_bound",
        }
    }

    pub fn all() -> &'static [MethodId] {
        &[
            MethodId::LowerBound,
            MethodId::Unimodal,
            MethodId::Mim,
            MethodId::Mpm,
            MethodId::Cmg,
            MethodId::Dcm,
            MethodId::ImageBind,
            MethodId::Mmbind,
            MethodId::MmbindC1,
            MethodId::MmbindC1C2,
            MethodId::UpperBound,
        ]
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the shared modality is embedded for binding.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BindingConfig {
    pub shared_modality: ModalityId,
    #[serde(default = "default_scheme")]
    pub scheme: PairScheme,
    #[serde(default)]
    pub weight_norm: WeightNorm,
    #[serde(default)]
    pub label_provider: LabelEmbeddingProvider,
    /// Metadata keys appended to label texts ("class=...; key=value").
    #[serde(default)]
    pub label_meta_keys: Vec<String>,
}

fn default_scheme() -> PairScheme {
    PairScheme::Top1
}

/// Everything a trainer needs besides data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: ModelSpec,
    pub binding: BindingConfig,
    /// Autoencoder template for shared-modality (and unimodal) pre-training.
    pub encoder: EncoderSpec,
    pub contrastive: ContrastiveConfig,
    pub finetune: FinetuneConfig,
    /// Mask applied during fine-tuning and evaluation (defaults to full).
    #[serde(default)]
    pub finetune_mask: Option<Vec<bool>>,
}

/// A trained model plus whatever stage artifacts the method produced.
/// `pretrained` is the state before supervised fine-tuning (the raw
/// initialization for methods without a pre-training stage), so deployments
/// can re-fine-tune under different modality masks.
pub struct TrainOutcome<T> {
    pub model: MultimodalModel<T>,
    pub pretrained: MultimodalModel<T>,
    pub pretrain: Option<PretrainReport>,
    pub pseudo: Option<PseudoPairedDataset>,
    pub pairing: Option<PairingReport>,
}

fn finetune_outcome<T: Scalar>(
    mut model: MultimodalModel<T>,
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    pretrain_report: Option<PretrainReport>,
    pseudo: Option<PseudoPairedDataset>,
) -> Result<TrainOutcome<T>> {
    let pretrained = model.clone();
    finetune(
        &mut model,
        finetune_set,
        &cfg.finetune,
        cfg.finetune_mask.as_deref(),
        derive_seed(seed, "finetune"),
    )?;
    Ok(TrainOutcome {
        model,
        pretrained,
        pretrain: pretrain_report,
        pseudo,
        pairing: None,
    })
}

/// Supervised training from scratch on the labeled fine-tuning set only.
pub fn train_lower_bound<T: Scalar>(
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let model = MultimodalModel::init(cfg.model.clone(), derive_seed(seed, "model-init"))?;
    finetune_outcome(model, finetune_set, cfg, seed, None, None)
}

/// Per-modality self-supervised (or supervised, when labels are visible)
/// pre-training on isolated data, then fine-tuning. No cross-modal
/// alignment.
pub fn train_unimodal<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let mut model = MultimodalModel::init(cfg.model.clone(), derive_seed(seed, "model-init"))?;
    let all_labeled = incomplete.iter().all(|d| d.labels().is_some());
    for (k, (mod_id, dim)) in cfg.model.modalities.iter().enumerate() {
        // Union of this modality's data across the isolated datasets.
        let mut parts: Vec<Array2<T>> = Vec::new();
        let mut labels: Vec<u32> = Vec::new();
        for ds in incomplete {
            if ds.has_modality(mod_id) && !mod_id.is_label() {
                parts.push(ds.view_as::<T>(mod_id)?);
                if let Some(l) = ds.labels() {
                    labels.extend_from_slice(l);
                }
            }
        }
        if parts.is_empty() {
            continue;
        }
        let rows: usize = parts.iter().map(Array2::nrows).sum();
        let mut union = Array2::zeros((rows, *dim));
        let mut at = 0;
        for p in parts {
            union.slice_mut(ndarray::s![at..at + p.nrows(), ..]).assign(&p);
            at += p.nrows();
        }
        if all_labeled {
            // Supervised unimodal pre-training: encoder + throwaway linear
            // probe on this modality's own labels.
            let enc_seed = derive_seed(seed, &format!("unimodal-sup-{mod_id}"));
            supervised_encoder_pretrain(
                &mut model.encoders[k],
                &union,
                &labels,
                cfg.model.num_classes,
                &cfg.encoder,
                enc_seed,
            )?;
        } else if let Some(spec) = model_shaped_ae_spec(&cfg.model, &cfg.encoder, mod_id, *dim) {
            let ae = train_autoencoder(&union, &spec, derive_seed(seed, &format!("unimodal-ae-{mod_id}")))?;
            model.encoders[k] = ae.encoder.net;
        }
    }
    finetune_outcome(model, finetune_set, cfg, seed, None, None)
}

/// Autoencoder spec whose encoder half matches the model's encoder shape,
/// so the trained net can be installed directly. Returns `None` when the
/// model latent would not be a bottleneck for this modality.
fn model_shaped_ae_spec(
    model: &ModelSpec,
    template: &EncoderSpec,
    modality: &ModalityId,
    input_dim: usize,
) -> Option<EncoderSpec> {
    if model.latent_dim > input_dim {
        return None;
    }
    let mut spec = template.for_modality(modality.clone());
    spec.hidden_dims = model.encoder_hidden.clone();
    spec.latent_dim = model.latent_dim;
    spec.activation = model.activation;
    Some(spec)
}

/// Supervised pre-training of a single encoder with a temporary linear
/// classifier head (cross-entropy).
fn supervised_encoder_pretrain<T: Scalar>(
    encoder: &mut Mlp<T>,
    data: &Array2<T>,
    labels: &[u32],
    num_classes: usize,
    spec: &EncoderSpec,
    seed: u64,
) -> Result<()> {
    use crate::encoders::{cross_entropy_loss_grad, SgdState};
    use rand::seq::SliceRandom;
    if labels.len() != data.nrows() {
        return Err(Error::ShapeMismatch {
            context: "supervised unimodal labels".into(),
            expected: vec![data.nrows()],
            actual: vec![labels.len()],
        });
    }
    let mut head = Mlp::<T>::seeded(
        &[encoder.out_dim(), num_classes],
        crate::encoders::Activation::Identity,
        derive_seed(seed, "probe"),
    );
    let mut enc_state = SgdState::new(encoder);
    let mut head_state = SgdState::new(&head);
    let lr = num::<T>(spec.learning_rate);
    let momentum = num::<T>(spec.momentum);
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut rng = crate::rng::seeded(derive_seed(seed, "batches"));
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch_size) {
            let x = crate::encoders::gather_rows(data, chunk);
            let y: Vec<u32> = chunk.iter().map(|&i| labels[i]).collect();
            let (feat, enc_cache) = encoder.forward_cached(&x);
            let (logits, head_cache) = head.forward_cached(&feat);
            let (loss, grad) = cross_entropy_loss_grad(&logits, &y);
            if !loss.to_f64_lossy().is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "unimodal-supervised".into(),
                    epoch,
                    lr: spec.learning_rate,
                });
            }
            let (head_grads, grad_feat) = head.backward(&head_cache, &grad);
            let (enc_grads, _) = encoder.backward(&enc_cache, &grad_feat);
            head_state.step(&mut head, &head_grads, lr, momentum);
            enc_state.step(encoder, &enc_grads, lr, momentum);
        }
    }
    Ok(())
}

fn contrastive_pretrain_outcome<T: Scalar>(
    set: &AggregatedTrainingSet,
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    contrastive: &ContrastiveConfig,
    seed: u64,
    pseudo: Option<PseudoPairedDataset>,
) -> Result<TrainOutcome<T>> {
    let mut model = MultimodalModel::init(cfg.model.clone(), derive_seed(seed, "model-init"))?;
    let report = pretrain(&mut model, set, contrastive, derive_seed(seed, "pretrain"))?;
    finetune_outcome(model, finetune_set, cfg, seed, Some(report), pseudo)
}

/// Do the samples carry labels usable as a supervised signal?
fn supervised_regime(incomplete: &[&Dataset]) -> bool {
    !incomplete.is_empty() && incomplete.iter().all(|d| d.labels().is_some())
}

/// Supervised variant of MIM/MPM pre-training: train encoders + classifier
/// directly on dummy-padded incomplete labeled data.
fn supervised_incomplete_pretrain<T: Scalar>(
    model: &mut MultimodalModel<T>,
    set: &AggregatedTrainingSet,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<()> {
    let labels = set.labels.as_ref().ok_or_else(|| {
        Error::validation("mim", "supervised pre-training needs labels on every sample")
    })?;
    let views: Vec<Array2<T>> = set
        .views
        .iter()
        .map(|v| v.mapv(|x| T::from_f32(x).unwrap()))
        .collect();
    let sup_cfg = FinetuneConfig {
        epochs: cfg.contrastive.epochs,
        batch_size: cfg.contrastive.batch_size,
        learning_rate: cfg.contrastive.learning_rate,
        momentum: cfg.contrastive.momentum,
        mode: crate::training::FinetuneMode::Full,
    };
    crate::training::finetune::supervised_train(
        model,
        &views,
        &set.mask,
        labels,
        &sup_cfg,
        derive_seed(seed, "sup-pretrain"),
    )?;
    Ok(())
}

/// MIM: train directly on dummy-padded incomplete data, dummies treated as
/// ordinary inputs (contrastive without dummy masking, or supervised when
/// labels are the shared modality).
pub fn train_mim<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    train_mim_like(incomplete, finetune_set, cfg, seed, false)
}

/// MPM: MIM plus the presence-mask prompt fed to the classifier.
pub fn train_mpm<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    train_mim_like(incomplete, finetune_set, cfg, seed, true)
}

fn train_mim_like<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    use_prompt: bool,
) -> Result<TrainOutcome<T>> {
    let mut cfg = cfg.clone();
    cfg.model.use_prompt = use_prompt;
    let set = build_training_set(incomplete, None, &cfg.model.modalities, cfg.binding.weight_norm)?;
    if supervised_regime(incomplete) {
        let mut model = MultimodalModel::init(cfg.model.clone(), derive_seed(seed, "model-init"))?;
        supervised_incomplete_pretrain(&mut model, &set, &cfg, seed)?;
        finetune_outcome(model, finetune_set, &cfg, seed, None, None)
    } else {
        let contrastive = ContrastiveConfig {
            mask_dummy_pairs: false,
            ..cfg.contrastive.clone()
        };
        contrastive_pretrain_outcome(&set, finetune_set, &cfg, &contrastive, seed, None)
    }
}

/// DCM: contrastive loss restricted to genuinely present modality pairs on
/// the original incomplete data; no pseudo pairs.
pub fn train_dcm<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let set = build_training_set(incomplete, None, &cfg.model.modalities, cfg.binding.weight_norm)?;
    let contrastive = ContrastiveConfig {
        mask_dummy_pairs: true,
        ..cfg.contrastive.clone()
    };
    contrastive_pretrain_outcome(&set, finetune_set, cfg, &contrastive, seed, None)
}

/// Model binding: pre-train the shared-modality encoder, freeze it, and
/// align every other modality to its embedding space on the original
/// (shared, X) pairs only.
pub fn train_imagebind<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    train_imagebind_impl(incomplete, finetune_set, cfg, seed, true)
}

/// Ablation twin of [`train_imagebind`] with the shared encoder left
/// trainable; with everything else identical this converges to DCM.
pub fn train_imagebind_unfrozen<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    train_imagebind_impl(incomplete, finetune_set, cfg, seed, false)
}

fn train_imagebind_impl<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    freeze_shared: bool,
) -> Result<TrainOutcome<T>> {
    let shared = &cfg.binding.shared_modality;
    if shared.is_label() {
        return Err(Error::validation(
            "imagebind",
            "model binding needs a sensor shared modality",
        ));
    }
    let k_shared = cfg
        .model
        .modality_index(shared)
        .ok_or_else(|| Error::validation("imagebind", format!("unknown shared modality '{shared}'")))?;

    let mut model = MultimodalModel::init(cfg.model.clone(), derive_seed(seed, "model-init"))?;
    // Pre-train the shared encoder on the union of shared-modality data.
    let mut parts: Vec<Array2<T>> = Vec::new();
    for ds in incomplete {
        if ds.has_modality(shared) {
            parts.push(ds.view_as::<T>(shared)?);
        }
    }
    if parts.is_empty() {
        return Err(Error::MissingSharedModality {
            left: incomplete.first().map(|d| d.name.clone()).unwrap_or_default(),
            right: String::new(),
            modality: shared.to_string(),
        });
    }
    let rows: usize = parts.iter().map(Array2::nrows).sum();
    let dim = parts[0].ncols();
    let mut union = Array2::zeros((rows, dim));
    let mut at = 0;
    for p in parts {
        union.slice_mut(ndarray::s![at..at + p.nrows(), ..]).assign(&p);
        at += p.nrows();
    }
    // The frozen representation must match the model's latent width.
    let ae_spec = model_shaped_ae_spec(&cfg.model, &cfg.encoder, shared, dim).ok_or_else(|| {
        Error::validation(
            "imagebind",
            format!(
                "model latent_dim {} exceeds shared modality dim {dim}",
                cfg.model.latent_dim
            ),
        )
    })?;
    let ae = train_autoencoder(&union, &ae_spec, derive_seed(seed, "imagebind-ae"))?;
    model.encoders[k_shared] = ae.encoder.net;

    let set = build_training_set(incomplete, None, &cfg.model.modalities, cfg.binding.weight_norm)?;
    let contrastive = ContrastiveConfig {
        mask_dummy_pairs: true,
        ..cfg.contrastive.clone()
    };
    let report = if freeze_shared {
        pretrain_with_frozen(&mut model, &set, &contrastive, derive_seed(seed, "pretrain"), k_shared)?
    } else {
        pretrain(&mut model, &set, &contrastive, derive_seed(seed, "pretrain"))?
    };
    finetune_outcome(model, finetune_set, cfg, seed, Some(report), None)
}

/// Contrastive pre-training with one encoder held frozen (its projection
/// head still trains, mapping the frozen space to the joint space).
fn pretrain_with_frozen<T: Scalar>(
    model: &mut MultimodalModel<T>,
    set: &AggregatedTrainingSet,
    cfg: &ContrastiveConfig,
    seed: u64,
    frozen: usize,
) -> Result<PretrainReport> {
    let snapshot = model.encoders[frozen].clone();
    let report = pretrain(model, set, cfg, seed)?;
    model.encoders[frozen] = snapshot;
    Ok(report)
}

/// CMG: train shared->X translators on the naturally paired portions, fill
/// the missing views by generation, then contrastive pre-training on the
/// completed data. Sensor shared modality only.
pub fn train_cmg<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let shared = &cfg.binding.shared_modality;
    if shared.is_label() {
        return Err(Error::validation("cmg", "cross-modality generation needs a sensor shared modality"));
    }
    let shared_dim = cfg
        .model
        .modalities
        .iter()
        .find(|(m, _)| m == shared)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::validation("cmg", format!("unknown shared modality '{shared}'")))?;

    // One translator per non-shared modality, trained on whichever dataset
    // naturally pairs it with the shared modality.
    let mut translators: Vec<Option<Mlp<T>>> = vec![None; cfg.model.modalities.len()];
    for (k, (mod_id, dim)) in cfg.model.modalities.iter().enumerate() {
        if mod_id == shared {
            continue;
        }
        let mut src: Vec<Array2<T>> = Vec::new();
        let mut dst: Vec<Array2<T>> = Vec::new();
        for ds in incomplete {
            if ds.has_modality(shared) && ds.has_modality(mod_id) {
                src.push(ds.view_as::<T>(shared)?);
                dst.push(ds.view_as::<T>(mod_id)?);
            }
        }
        if src.is_empty() {
            continue;
        }
        let stack = |parts: &[Array2<T>], cols: usize| {
            let rows: usize = parts.iter().map(Array2::nrows).sum();
            let mut a = Array2::zeros((rows, cols));
            let mut at = 0;
            for p in parts {
                a.slice_mut(ndarray::s![at..at + p.nrows(), ..]).assign(p);
                at += p.nrows();
            }
            a
        };
        let x = stack(&src, shared_dim);
        let y = stack(&dst, *dim);
        translators[k] = Some(train_translator(
            &x,
            &y,
            cfg,
            derive_seed(seed, &format!("cmg-translator-{mod_id}")),
        )?);
    }

    // Complete every incomplete sample by generating its missing views.
    let mut completed: Vec<Dataset> = Vec::with_capacity(incomplete.len());
    for ds in incomplete {
        let shared_view = ds.view_as::<T>(shared)?;
        let mut views = std::collections::BTreeMap::new();
        for (k, (mod_id, _)) in cfg.model.modalities.iter().enumerate() {
            let arr: Array2<f32> = if ds.has_modality(mod_id) {
                ds.view(mod_id)?.clone()
            } else {
                let t = translators[k].as_ref().ok_or_else(|| {
                    Error::validation(
                        "cmg",
                        format!("no natural pairing trains a translator for '{mod_id}'"),
                    )
                })?;
                t.forward(&shared_view).mapv(|v| v.to_f64_lossy() as f32)
            };
            views.insert(mod_id.clone(), arr);
        }
        completed.push(Dataset::new(
            format!("{}_completed", ds.name),
            views,
            None,
            None,
            Vec::new(),
            ds.num_classes,
            ds.class_names.clone(),
        )?);
    }
    let refs: Vec<&Dataset> = completed.iter().collect();
    let set = build_training_set(&refs, None, &cfg.model.modalities, cfg.binding.weight_norm)?;
    contrastive_pretrain_outcome(&set, finetune_set, cfg, &cfg.contrastive, seed, None)
}

/// MSE-regression translator from the shared modality to a target modality.
fn train_translator<T: Scalar>(
    src: &Array2<T>,
    dst: &Array2<T>,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Mlp<T>> {
    use crate::encoders::{mse_loss_grad, SgdState};
    use rand::seq::SliceRandom;
    let mut dims = vec![src.ncols()];
    dims.extend(&cfg.model.encoder_hidden);
    dims.push(dst.ncols());
    let mut net = Mlp::<T>::seeded(&dims, cfg.model.activation, derive_seed(seed, "init"));
    let mut state = SgdState::new(&net);
    let lr = num::<T>(cfg.encoder.learning_rate);
    let momentum = num::<T>(cfg.encoder.momentum);
    let mut order: Vec<usize> = (0..src.nrows()).collect();
    let mut rng = crate::rng::seeded(derive_seed(seed, "batches"));
    for epoch in 0..cfg.encoder.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.encoder.batch_size) {
            let x = crate::encoders::gather_rows(src, chunk);
            let y = crate::encoders::gather_rows(dst, chunk);
            let (out, cache) = net.forward_cached(&x);
            let (loss, grad) = mse_loss_grad(&out, &y);
            if !loss.to_f64_lossy().is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "cmg-translator".into(),
                    epoch,
                    lr: cfg.encoder.learning_rate,
                });
            }
            let (grads, _) = net.backward(&cache, &grad);
            state.step(&mut net, &grads, lr, momentum);
        }
    }
    Ok(net)
}

/// Which MMBind components are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MmbindComponents {
    /// C2: aggregate the original incomplete samples alongside pseudo pairs.
    pub heterogeneous_aggregate: bool,
    /// C3: weight contrastive terms by pairing similarity.
    pub similarity_weights: bool,
}

impl MmbindComponents {
    pub fn full() -> Self {
        MmbindComponents {
            heterogeneous_aggregate: true,
            similarity_weights: true,
        }
    }

    pub fn c1() -> Self {
        MmbindComponents {
            heterogeneous_aggregate: false,
            similarity_weights: false,
        }
    }

    pub fn c1c2() -> Self {
        MmbindComponents {
            heterogeneous_aggregate: true,
            similarity_weights: false,
        }
    }
}

/// Build the shared-modality embedder for a binding config.
pub fn make_embedder(
    binding: &BindingConfig,
    encoder: &EncoderSpec,
    seed: u64,
) -> Result<Box<dyn SharedModalityEmbedder>> {
    if binding.shared_modality.is_label() {
        Ok(Box::new(LabelTextEmbedder {
            embedder: binding.label_provider.build()?,
        }))
    } else {
        Ok(Box::new(AutoencoderEmbedder {
            spec: encoder.clone(),
            seed: derive_seed(seed, "binding-encoder"),
        }))
    }
}

/// Stage 1 of MMBind: bind the incomplete datasets into pseudo pairs.
pub fn bind_datasets(
    incomplete: &[&Dataset],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PseudoPairedDataset> {
    let selectors = vec![cfg.binding.shared_modality.clone(); incomplete.len().saturating_sub(1)];
    let mut embedder = make_embedder(&cfg.binding, &cfg.encoder, seed)?;
    bind_many(
        incomplete,
        &selectors,
        embedder.as_mut(),
        cfg.binding.scheme,
        &cfg.binding.label_meta_keys,
    )
}

/// The full two-stage method (or an ablation subset of it).
pub fn train_mmbind<T: Scalar>(
    incomplete: &[&Dataset],
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    components: MmbindComponents,
) -> Result<TrainOutcome<T>> {
    let pseudo = bind_datasets(incomplete, cfg, seed)?;
    let natural: Vec<&Dataset> = if components.heterogeneous_aggregate {
        incomplete.to_vec()
    } else {
        Vec::new()
    };
    let weight_norm = cfg.binding.weight_norm;
    let mut set = build_training_set(&natural, Some(&pseudo), &cfg.model.modalities, weight_norm)?;
    if !components.similarity_weights {
        for w in &mut set.weights {
            *w = 1.0;
        }
    }
    contrastive_pretrain_outcome(&set, finetune_set, cfg, &cfg.contrastive, seed, Some(pseudo))
}

/// Upper bound: unweighted contrastive pre-training on the naturally paired
/// pool, then fine-tuning.
pub fn train_upper_bound<T: Scalar>(
    paired_pool: &Dataset,
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let set = build_training_set(&[paired_pool], None, &cfg.model.modalities, cfg.binding.weight_norm)?;
    contrastive_pretrain_outcome(&set, finetune_set, cfg, &cfg.contrastive, seed, None)
}

/// Dispatch a method over a corpus. Data visibility is enforced here: each
/// trainer call only receives what the method may see.
pub fn train_method<T: Scalar>(
    method: MethodId,
    corpus: &Corpus,
    finetune_set: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    let incomplete: Vec<&Dataset> = corpus.incomplete.iter().collect();
    let mut outcome = match method {
        MethodId::LowerBound => train_lower_bound(finetune_set, cfg, seed),
        MethodId::Unimodal => train_unimodal(&incomplete, finetune_set, cfg, seed),
        MethodId::Mim => train_mim(&incomplete, finetune_set, cfg, seed),
        MethodId::Mpm => train_mpm(&incomplete, finetune_set, cfg, seed),
        MethodId::Cmg => train_cmg(&incomplete, finetune_set, cfg, seed),
        MethodId::Dcm => train_dcm(&incomplete, finetune_set, cfg, seed),
        MethodId::ImageBind => train_imagebind(&incomplete, finetune_set, cfg, seed),
        MethodId::Mmbind => {
            train_mmbind(&incomplete, finetune_set, cfg, seed, MmbindComponents::full())
        }
        MethodId::MmbindC1 => {
            train_mmbind(&incomplete, finetune_set, cfg, seed, MmbindComponents::c1())
        }
        MethodId::MmbindC1C2 => {
            train_mmbind(&incomplete, finetune_set, cfg, seed, MmbindComponents::c1c2())
        }
        MethodId::UpperBound => train_upper_bound(&corpus.paired_pool, finetune_set, cfg, seed),
    }?;
    // Pairing quality is evaluation metadata, computed after training from
    // the hidden ground truth.
    if let Some(pseudo) = &outcome.pseudo {
        let sources: Vec<&Dataset> = corpus.incomplete.iter().collect();
        if sources.iter().all(|d| d.has_hidden_labels()) {
            outcome.pairing = Some(pairing_accuracy(pseudo, &sources)?);
        }
    }
    Ok(outcome)
}
