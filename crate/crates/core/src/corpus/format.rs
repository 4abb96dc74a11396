//! On-disk dataset format: one directory per dataset holding a JSON
//! manifest, one little-endian float32 array per modality, an optional
//! int32 `labels` array, `meta.jsonl`, and a separate `ground_truth` file
//! that is only read when the loader is explicitly asked for it.

use super::{CorpusSpec, Dataset, ModalityId};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModalityEntry {
    name: ModalityId,
    dim: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    name: String,
    num_samples: usize,
    num_classes: usize,
    class_names: Vec<String>,
    modalities: Vec<ModalityEntry>,
    has_labels: bool,
    has_ground_truth: bool,
    has_meta: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<CorpusSpec>,
}

/// Controls whether hidden ground-truth labels are loaded. Binding and
/// training go through the default (ground truth stays on disk).
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    pub with_ground_truth: bool,
}

impl LoadOptions {
    pub fn with_ground_truth() -> Self {
        LoadOptions { with_ground_truth: true }
    }
}

pub(crate) fn write_f32s(path: &Path, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_f32s(path: &Path) -> Result<Vec<f32>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path.display().to_string(),
            format!("file length {} is not a multiple of 4", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_i32s(path: &Path, values: &[u32]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&(*v as i32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_i32s(path: &Path) -> Result<Vec<u32>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path.display().to_string(),
            format!("file length {} is not a multiple of 4", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as u32)
        .collect())
}

/// Write a dataset to `dir` (created if missing, files overwritten).
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    save_dataset_inner(ds, dir, None)
}

fn save_dataset_inner(ds: &Dataset, dir: &Path, spec: Option<&CorpusSpec>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut modalities = Vec::new();
    for m in ds.sensor_modalities() {
        let file = format!("{m}.bin");
        let view = ds.view(m)?;
        write_f32s(&dir.join(&file), view.iter().copied())?;
        modalities.push(ModalityEntry {
            name: m.clone(),
            dim: view.ncols(),
            file,
        });
    }
    if let Some(labels) = ds.labels_raw() {
        write_i32s(&dir.join("labels.bin"), labels)?;
    }
    if let Some(gt) = ds.hidden_labels_raw() {
        write_i32s(&dir.join("ground_truth.bin"), gt)?;
    }
    if !ds.meta.is_empty() {
        let mut w = BufWriter::new(File::create(dir.join("meta.jsonl"))?);
        for m in &ds.meta {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        name: ds.name.clone(),
        num_samples: ds.len(),
        num_classes: ds.num_classes,
        class_names: ds.class_names.clone(),
        modalities,
        has_labels: ds.labels_raw().is_some(),
        has_ground_truth: ds.hidden_labels_raw().is_some(),
        has_meta: !ds.meta.is_empty(),
        spec: spec.cloned(),
    };
    let f = File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    Ok(())
}

/// Load a dataset directory, verifying every array against the manifest.
pub fn load_dataset(dir: &Path, opts: LoadOptions) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            manifest_path.display().to_string(),
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }
    let n = manifest.num_samples;
    let mut views = BTreeMap::new();
    for entry in &manifest.modalities {
        let path = dir.join(&entry.file);
        let raw = read_f32s(&path)?;
        if raw.len() != n * entry.dim {
            return Err(Error::ShapeMismatch {
                context: format!("{} ({})", entry.name, path.display()),
                expected: vec![n, entry.dim],
                actual: vec![raw.len() / entry.dim.max(1), entry.dim],
            });
        }
        let arr = Array2::from_shape_vec((n, entry.dim), raw)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        views.insert(entry.name.clone(), arr);
    }
    let read_label_file = |file: &str, what: &str| -> Result<Vec<u32>> {
        let path = dir.join(file);
        let v = read_i32s(&path)?;
        if v.len() != n {
            return Err(Error::ShapeMismatch {
                context: format!("{what} ({})", path.display()),
                expected: vec![n],
                actual: vec![v.len()],
            });
        }
        Ok(v)
    };
    let labels = if manifest.has_labels {
        Some(read_label_file("labels.bin", "labels")?)
    } else {
        None
    };
    let hidden = if manifest.has_ground_truth && opts.with_ground_truth {
        Some(read_label_file("ground_truth.bin", "ground truth")?)
    } else {
        None
    };
    let meta = if manifest.has_meta {
        let f = BufReader::new(File::open(dir.join("meta.jsonl"))?);
        let mut out = Vec::with_capacity(n);
        for line in f.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        if out.len() != n {
            return Err(Error::ShapeMismatch {
                context: format!("meta.jsonl ({})", dir.display()),
                expected: vec![n],
                actual: vec![out.len()],
            });
        }
        out
    } else {
        Vec::new()
    };
    Dataset::new(
        manifest.name,
        views,
        labels,
        hidden,
        meta,
        manifest.num_classes,
        manifest.class_names,
    )
}

/// Save a full corpus: one subdirectory per dataset plus a spec echo.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let f = File::create(dir.join("corpus.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &corpus.spec)?;
    let spec = Some(&corpus.spec);
    for ds in &corpus.incomplete {
        save_dataset_inner(ds, &dir.join(&ds.name), spec)?;
    }
    save_dataset_inner(&corpus.finetune, &dir.join("finetune"), spec)?;
    save_dataset_inner(&corpus.test, &dir.join("test"), spec)?;
    save_dataset_inner(&corpus.paired_pool, &dir.join("paired_pool"), spec)?;
    Ok(())
}

/// Load a corpus written by [`save_corpus`].
pub fn load_corpus(dir: &Path, opts: LoadOptions) -> Result<Corpus> {
    let spec_path = dir.join("corpus.json");
    let spec: CorpusSpec = serde_json::from_reader(BufReader::new(File::open(&spec_path)?))
        .map_err(|e| Error::format(spec_path.display().to_string(), e.to_string()))?;
    let mut incomplete = Vec::new();
    for (k, ds) in spec.datasets.iter().enumerate() {
        let name = ds.name.clone().unwrap_or_else(|| format!("d{k}"));
        incomplete.push(load_dataset(&dir.join(&name), opts)?);
    }
    Ok(Corpus {
        incomplete,
        finetune: load_dataset(&dir.join("finetune"), opts)?,
        test: load_dataset(&dir.join("test"), opts)?,
        paired_pool: load_dataset(&dir.join("paired_pool"), opts)?,
        spec,
    })
}
