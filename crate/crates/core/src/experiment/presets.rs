//! Canonical synthetic benchmark setups shared by the bundled configs and
//! the acceptance suite. Everything here is deliberately small enough for a
//! CPU desk run.

use super::{CorpusSource, ExperimentConfig, ModelSettings};
use crate::baselines::{BindingConfig, MethodId};
use crate::binding::{PairScheme, WeightNorm};
use crate::corpus::{CorpusSpec, DatasetSpec, ModalityDef};
use crate::encoders::{Activation, EncoderSpec, LabelEmbeddingProvider};
use crate::training::{ContrastiveConfig, FinetuneConfig, FinetuneMode};
use std::collections::BTreeMap;

fn corpus_shell(seed: u64) -> CorpusSpec {
    CorpusSpec {
        num_classes: 5,
        modalities: vec![
            ModalityDef { name: "m1".into(), dim: 20 },
            ModalityDef { name: "m2".into(), dim: 20 },
            ModalityDef { name: "ms".into(), dim: 24 },
        ],
        latent_dim: 8,
        class_separation: 1.0,
        sample_jitter: 0.35,
        modality_snr: BTreeMap::new(),
        datasets: vec![
            DatasetSpec {
                name: None,
                size: 500,
                modalities: vec!["m1".into(), "ms".into()],
                domain_shift: 0.2,
            },
            DatasetSpec {
                name: None,
                size: 500,
                modalities: vec!["m2".into(), "ms".into()],
                domain_shift: 0.2,
            },
        ],
        finetune_size: 2000,
        test_size: 1000,
        paired_pool_size: 0,
        class_names: None,
        seed,
    }
}

/// Corpus for the binding-modality contrast: a highly discriminative shared
/// modality (snr 10) under mild domain shift.
pub fn pairing_corpus(seed: u64) -> CorpusSpec {
    let mut spec = corpus_shell(seed);
    spec.modality_snr = BTreeMap::from([
        ("m1".into(), 1.5),
        ("m2".into(), 1.5),
        ("ms".into(), 10.0),
    ]);
    spec
}

/// Same corpus with the shared modality degraded to pure noise (the
/// WiFi-like failure mode).
pub fn noise_shared_corpus(seed: u64) -> CorpusSpec {
    let mut spec = pairing_corpus(seed);
    spec.modality_snr.insert("ms".into(), 0.0);
    spec
}

/// Two incomplete datasets (m1, ms) and (m2, ms) for the comparative
/// benchmark. Individual samples are noisy enough that a handful of labels
/// cannot train a model from scratch, while 2x500 unlabeled samples are
/// plenty for alignment; the shared modality is deliberately imperfect so
/// that pseudo pairs carry realistic mispairing.
pub fn benchmark_corpus(seed: u64) -> CorpusSpec {
    let mut spec = corpus_shell(seed);
    spec.sample_jitter = 0.6;
    spec.modality_snr = BTreeMap::from([
        ("m1".into(), 0.7),
        ("m2".into(), 0.7),
        ("ms".into(), 1.3),
    ]);
    spec.finetune_size = 1500;
    spec
}

/// Harder corpus for the pairing-scheme trade-off: weaker shared modality
/// and more domain shift, so the similarity threshold actually matters.
pub fn tradeoff_corpus(seed: u64) -> CorpusSpec {
    let mut spec = corpus_shell(seed);
    spec.modality_snr = BTreeMap::from([
        ("m1".into(), 1.5),
        ("m2".into(), 1.5),
        ("ms".into(), 1.1),
    ]);
    spec.sample_jitter = 0.9;
    for ds in &mut spec.datasets {
        ds.domain_shift = 0.7;
    }
    spec
}

pub fn benchmark_binding() -> BindingConfig {
    BindingConfig {
        shared_modality: "ms".into(),
        scheme: PairScheme::Top1,
        weight_norm: WeightNorm::Max,
        label_provider: LabelEmbeddingProvider::default(),
        label_meta_keys: vec![],
    }
}

pub fn benchmark_model() -> ModelSettings {
    ModelSettings {
        encoder_hidden: vec![32],
        latent_dim: 16,
        head_hidden: vec![],
        projection_dim: 32,
        activation: Activation::Relu,
        classifier_hidden: vec![32],
    }
}

pub fn benchmark_encoder() -> EncoderSpec {
    EncoderSpec {
        modality: "ms".into(),
        hidden_dims: vec![32],
        latent_dim: 16,
        activation: Activation::Relu,
        epochs: 30,
        batch_size: 64,
        learning_rate: 0.01,
        momentum: 0.9,
    }
}

pub fn benchmark_training() -> ContrastiveConfig {
    ContrastiveConfig {
        temperature: 0.3,
        batch_size: 64,
        epochs: 20,
        learning_rate: 0.005,
        momentum: 0.9,
        mask_dummy_pairs: true,
        weight_norm: WeightNorm::Max,
    }
}

pub fn benchmark_finetune() -> FinetuneConfig {
    FinetuneConfig {
        epochs: 60,
        batch_size: 16,
        learning_rate: 0.03,
        momentum: 0.9,
        mode: FinetuneMode::Full,
    }
}

fn base_config(config_id: &str, corpus: CorpusSpec, methods: Vec<MethodId>) -> ExperimentConfig {
    ExperimentConfig {
        config_id: config_id.into(),
        corpus: CorpusSource::Inline(corpus),
        splits: None,
        binding: benchmark_binding(),
        model: benchmark_model(),
        encoder: Some(benchmark_encoder()),
        training: benchmark_training(),
        finetune: benchmark_finetune(),
        finetune_fraction: 0.01,
        eval_masks: vec![],
        methods,
        seeds: vec![0, 1, 2, 3, 4],
        outputs: None,
    }
}

/// Comparative ordering benchmark (Tables 2-3 analog at desk scale).
pub fn comparison_config() -> ExperimentConfig {
    base_config(
        "benchmark",
        benchmark_corpus(42),
        vec![
            MethodId::LowerBound,
            MethodId::Mim,
            MethodId::Dcm,
            MethodId::Mmbind,
            MethodId::UpperBound,
        ],
    )
}

/// Component ablation (Fig. 6 analog): pairing only, plus heterogeneous
/// aggregation, plus similarity weighting.
pub fn ablation_config() -> ExperimentConfig {
    base_config(
        "ablation",
        benchmark_corpus(42),
        vec![
            MethodId::LowerBound,
            MethodId::MmbindC1,
            MethodId::MmbindC1C2,
            MethodId::Mmbind,
        ],
    )
}

/// Deployment robustness (Table 7 analog): unimodal masks plus full.
pub fn robustness_config() -> ExperimentConfig {
    let mut config = base_config(
        "robustness",
        benchmark_corpus(42),
        vec![MethodId::LowerBound, MethodId::Mmbind],
    );
    config.config_id = "robustness".into();
    config.eval_masks = vec![
        vec!["m1".into()],
        vec!["m2".into()],
        vec!["ms".into()],
        vec!["m1".into(), "m2".into(), "ms".into()],
    ];
    config
}

/// Binding-modality contrast (Table 5 analog): discriminative vs noise
/// shared modality.
pub fn binding_modality_config() -> ExperimentConfig {
    base_config(
        "binding_modality",
        benchmark_corpus(42),
        vec![MethodId::Mmbind],
    )
}
