//! Config-driven experiment runner: corpus -> binding -> pre-training ->
//! fine-tuning -> evaluation, repeated over methods and seeds, with CSV /
//! JSON reports.

pub mod presets;
pub mod report;

pub use report::{report, ReportSummary};

use crate::baselines::{train_method, BindingConfig, MethodId, PipelineConfig};
use crate::corpus::{
    generate_corpus, load_corpus, split_complete_dataset, stratified_fraction, Corpus, CorpusSpec, LoadOptions, ModalityId,
};
use crate::encoders::{Activation, EncoderSpec};
use crate::error::{Error, Result};
use crate::training::{evaluate, ContrastiveConfig, FinetuneConfig, ModelSpec};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Where the corpus comes from: an inline spec or a saved corpus directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Inline(CorpusSpec),
    Path(PathBuf),
}

/// Replace the corpus's incomplete datasets by splitting its paired pool.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub modality_sets: Vec<Vec<ModalityId>>,
    pub fractions: Vec<f64>,
}

fn default_latent_dim() -> usize {
    16
}

fn default_projection_dim() -> usize {
    crate::encoders::DEFAULT_PROJECTION_DIM
}

fn default_activation() -> Activation {
    Activation::Relu
}

/// Model architecture knobs; modalities and class count come from the corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSettings {
    #[serde(default)]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default)]
    pub head_hidden: Vec<usize>,
    #[serde(default = "default_projection_dim")]
    pub projection_dim: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub classifier_hidden: Vec<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            encoder_hidden: Vec::new(),
            latent_dim: default_latent_dim(),
            head_hidden: Vec::new(),
            projection_dim: default_projection_dim(),
            activation: default_activation(),
            classifier_hidden: Vec::new(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_fraction() -> f64 {
    1.0
}

/// Declarative description of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_id: String,
    pub corpus: CorpusSource,
    #[serde(default)]
    pub splits: Option<SplitSpec>,
    pub binding: BindingConfig,
    #[serde(default)]
    pub model: ModelSettings,
    /// Autoencoder used for shared-modality embedding during binding.
    #[serde(default)]
    pub encoder: Option<EncoderSpec>,
    #[serde(default)]
    pub training: ContrastiveConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    #[serde(default = "default_fraction")]
    pub finetune_fraction: f64,
    /// Modality masks to evaluate; empty means full-modality only.
    #[serde(default)]
    pub eval_masks: Vec<Vec<ModalityId>>,
    pub methods: Vec<MethodId>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_yaml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_yaml::from_str(&text).map_err(|e| {
            Error::config(
                format!(
                    "{}{}",
                    path.display(),
                    e.location()
                        .map(|l| format!(":{}:{}", l.line(), l.column()))
                        .unwrap_or_default()
                ),
                e.to_string(),
            )
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_yaml(&self) -> Result<String> {
        serde_yaml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_id.is_empty() {
            return Err(Error::config("config_id", "must be non-empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed required"));
        }
        if !(0.0..=1.0).contains(&self.finetune_fraction) || self.finetune_fraction == 0.0 {
            return Err(Error::config("finetune_fraction", "must be in (0, 1]"));
        }
        if let CorpusSource::Inline(spec) = &self.corpus {
            spec.validate().map_err(|e| match e {
                Error::Validation { field, message } => Error::Config {
                    path: format!("corpus.{field}"),
                    message,
                },
                other => other,
            })?;
        }
        self.binding.scheme.validate()?;
        self.training.validate()?;
        self.finetune.validate()?;
        Ok(())
    }

    fn resolve_corpus(&self) -> Result<Corpus> {
        let mut corpus = match &self.corpus {
            CorpusSource::Inline(spec) => generate_corpus(spec)?,
            CorpusSource::Path(dir) => load_corpus(dir, LoadOptions::with_ground_truth())?,
        };
        if let Some(splits) = &self.splits {
            let source = corpus.paired_pool.clone();
            let parts = split_complete_dataset(&source, &splits.modality_sets, &splits.fractions)?;
            corpus.incomplete = parts;
        }
        // Config-declared modalities must exist.
        let known: Vec<&ModalityId> = corpus.spec.modalities.iter().map(|m| &m.name).collect();
        let shared = &self.binding.shared_modality;
        if !shared.is_label() && !known.contains(&shared) {
            return Err(Error::config(
                "binding.shared_modality",
                format!("modality '{shared}' not in corpus"),
            ));
        }
        for (i, mask) in self.eval_masks.iter().enumerate() {
            for m in mask {
                if !known.contains(&m) {
                    return Err(Error::config(
                        format!("eval_masks[{i}]"),
                        format!("modality '{m}' not in corpus"),
                    ));
                }
            }
        }
        Ok(corpus)
    }

    /// Materialize the pipeline config for this corpus.
    pub fn pipeline(&self, corpus_spec: &CorpusSpec) -> PipelineConfig {
        let modalities: Vec<(ModalityId, usize)> = corpus_spec
            .modalities
            .iter()
            .map(|m| (m.name.clone(), m.dim))
            .collect();
        let encoder = self.encoder.clone().unwrap_or_else(|| {
            let mut spec = EncoderSpec::new(
                self.binding.shared_modality.clone(),
                self.model.encoder_hidden.clone(),
                self.model.latent_dim,
            );
            spec.epochs = 30;
            spec.learning_rate = 0.01;
            spec
        });
        PipelineConfig {
            model: ModelSpec {
                modalities,
                encoder_hidden: self.model.encoder_hidden.clone(),
                latent_dim: self.model.latent_dim,
                head_hidden: self.model.head_hidden.clone(),
                projection_dim: self.model.projection_dim,
                activation: self.model.activation,
                classifier_hidden: self.model.classifier_hidden.clone(),
                num_classes: corpus_spec.num_classes,
                use_prompt: false,
            },
            binding: self.binding.clone(),
            encoder,
            contrastive: self.training.clone(),
            finetune: self.finetune.clone(),
            finetune_mask: None,
        }
    }

    fn mask_vector(&self, spec: &CorpusSpec, mask: &[ModalityId]) -> Vec<bool> {
        spec.modalities.iter().map(|m| mask.contains(&m.name)).collect()
    }

    fn mask_label(&self, mask: &[ModalityId]) -> String {
        mask.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// One evaluation result; the CSV schema of `results.csv`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_id: String,
    pub method: String,
    pub seed: u64,
    pub mask: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub pairing_accuracy: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub force: bool,
    pub dry_run: bool,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub rows: Vec<ResultRow>,
    pub plan: Vec<String>,
    pub outputs: Option<PathBuf>,
}

/// Diagnostics kept per (method, seed) run.
#[derive(Serialize)]
struct RunArtifacts<'a> {
    method: &'a str,
    seed: u64,
    pretrain_loss: Option<&'a [f64]>,
    pairing_confusion: Option<&'a [Vec<u64>]>,
    pairing_accuracy: Option<f64>,
}

/// Execute the whole experiment. With `dry_run`, validates and returns the
/// resolved plan without training or writing anything.
pub fn run(config: &ExperimentConfig, out_dir: Option<&Path>, opts: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let corpus = config.resolve_corpus()?;
    let pipeline = config.pipeline(&corpus.spec);

    let mut masks: Vec<(String, Option<Vec<bool>>)> = vec![("full".into(), None)];
    for mask in &config.eval_masks {
        masks.push((
            config.mask_label(mask),
            Some(config.mask_vector(&corpus.spec, mask)),
        ));
    }

    let mut summary = RunSummary::default();
    for &method in &config.methods {
        for &seed in &config.seeds {
            summary.plan.push(format!(
                "{} method={method} seed={seed} masks=[{}]",
                config.config_id,
                masks.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(", ")
            ));
        }
    }
    if opts.dry_run {
        return Ok(summary);
    }

    let out = out_dir.or(config.outputs.as_deref());
    if let Some(dir) = out {
        if dir.exists() && dir.join("results.csv").exists() && !opts.force {
            return Err(Error::config(
                "outputs",
                format!("{} already holds results; pass --force to overwrite", dir.display()),
            ));
        }
        fs::create_dir_all(dir)?;
        // Flag partial outputs until the run completes.
        fs::write(dir.join("INCOMPLETE"), b"run in progress\n")?;
        fs::write(dir.join("resolved_config.yaml"), config.to_yaml()?)?;
    }

    let finetune_set = stratified_fraction(&corpus.finetune, config.finetune_fraction, "finetune_subset")?;

    for &method in &config.methods {
        for &seed in &config.seeds {
            let start = Instant::now();
            let outcome = train_method::<Real>(method, &corpus, &finetune_set, &pipeline, seed)?;
            let wall = start.elapsed().as_secs_f64();
            for (label, mask) in &masks {
                // Mask-specific deployments re-fine-tune the pre-trained
                // state under that mask (from scratch for methods without a
                // pre-training stage).
                let report = if let Some(mask) = mask {
                    let mut masked = outcome.pretrained.clone();
                    crate::training::finetune(
                        &mut masked,
                        &finetune_set,
                        &pipeline.finetune,
                        Some(mask),
                        crate::rng::derive_seed(seed, &format!("mask-finetune-{label}")),
                    )?;
                    evaluate(&masked, &corpus.test, Some(mask))?
                } else {
                    evaluate(&outcome.model, &corpus.test, None)?
                };
                summary.rows.push(ResultRow {
                    config_id: config.config_id.clone(),
                    method: method.as_str().into(),
                    seed,
                    mask: label.clone(),
                    accuracy: report.accuracy,
                    macro_f1: report.macro_f1,
                    pairing_accuracy: outcome.pairing.as_ref().map(|p| p.accuracy),
                    wall_time_s: wall,
                });
            }
            if let Some(dir) = out {
                let artifacts = RunArtifacts {
                    method: method.as_str(),
                    seed,
                    pretrain_loss: outcome.pretrain.as_ref().map(|p| p.loss_curve.as_slice()),
                    pairing_confusion: outcome.pairing.as_ref().map(|p| p.confusion.as_slice()),
                    pairing_accuracy: outcome.pairing.as_ref().map(|p| p.accuracy),
                };
                let f = File::create(dir.join(format!("run_{}_{seed}.json", method.as_str())))?;
                serde_json::to_writer_pretty(BufWriter::new(f), &artifacts)?;
            }
        }
    }

    if let Some(dir) = out {
        write_results(&summary.rows, dir)?;
        fs::remove_file(dir.join("INCOMPLETE"))?;
        summary.outputs = Some(dir.to_path_buf());
    }
    Ok(summary)
}

/// `results.csv` columns, in order.
pub const CSV_HEADER: &str =
    "config_id,method,seed,mask,accuracy,macro_f1,pairing_accuracy,wall_time_s";

pub fn write_results(rows: &[ResultRow], dir: &Path) -> Result<()> {
    let mut csv = BufWriter::new(File::create(dir.join("results.csv"))?);
    writeln!(csv, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            csv,
            "{},{},{},{},{:.6},{:.6},{},{:.3}",
            r.config_id,
            r.method,
            r.seed,
            r.mask,
            r.accuracy,
            r.macro_f1,
            r.pairing_accuracy.map(|p| format!("{p:.6}")).unwrap_or_default(),
            r.wall_time_s
        )?;
    }
    csv.flush()?;
    let f = File::create(dir.join("results.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), rows)?;
    Ok(())
}

pub fn read_results(dir: &Path) -> Result<Vec<ResultRow>> {
    let path = dir.join("results.json");
    if !path.exists() {
        return Err(Error::EmptyInput(format!("no results.json in {}", dir.display())));
    }
    let rows: Vec<ResultRow> = serde_json::from_reader(File::open(&path)?)?;
    Ok(rows)
}
