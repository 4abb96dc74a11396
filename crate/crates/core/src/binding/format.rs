//! Pseudo-paired dataset serialization: manifest + per-modality arrays +
//! a float32 `similarity` array + `provenance.jsonl` as an auditable trace
//! of which source samples were matched.

use super::{PseudoPairedDataset, SourceRef};
use crate::corpus::format::{read_f32s, write_f32s};
use crate::corpus::ModalityId;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ModalityEntry {
    name: ModalityId,
    dim: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    num_samples: usize,
    num_classes: usize,
    modalities: Vec<ModalityEntry>,
    has_labels: bool,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    sample: usize,
    anchor: SourceRef,
    matched: Vec<SourceRef>,
}

pub fn save_pseudo_paired(pseudo: &PseudoPairedDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut modalities = Vec::new();
    for (m, view) in &pseudo.views {
        let file = format!("{m}.bin");
        write_f32s(&dir.join(&file), view.iter().copied())?;
        modalities.push(ModalityEntry {
            name: m.clone(),
            dim: view.ncols(),
            file,
        });
    }
    write_f32s(
        &dir.join("similarity.bin"),
        pseudo.similarities.iter().map(|v| *v as f32),
    )?;
    if let Some(labels) = &pseudo.labels {
        let mut w = BufWriter::new(File::create(dir.join("labels.bin"))?);
        for v in labels {
            w.write_all(&(*v as i32).to_le_bytes())?;
        }
        w.flush()?;
    }
    let mut w = BufWriter::new(File::create(dir.join("provenance.jsonl"))?);
    for (i, prov) in pseudo.provenance.iter().enumerate() {
        let line = ProvenanceLine {
            sample: i,
            anchor: prov[0],
            matched: prov[1..].to_vec(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let manifest = Manifest {
        format_version: crate::corpus::format::FORMAT_VERSION,
        num_samples: pseudo.len(),
        num_classes: pseudo.num_classes,
        modalities,
        has_labels: pseudo.labels.is_some(),
    };
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(dir.join("manifest.json"))?),
        &manifest,
    )?;
    Ok(())
}

pub fn load_pseudo_paired(dir: &Path) -> Result<PseudoPairedDataset> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
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
        views.insert(
            entry.name.clone(),
            Array2::from_shape_vec((n, entry.dim), raw)
                .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?,
        );
    }
    let sims = read_f32s(&dir.join("similarity.bin"))?;
    if sims.len() != n {
        return Err(Error::ShapeMismatch {
            context: "similarity array".into(),
            expected: vec![n],
            actual: vec![sims.len()],
        });
    }
    let labels = if manifest.has_labels {
        let mut bytes = Vec::new();
        use std::io::Read;
        File::open(dir.join("labels.bin"))?.read_to_end(&mut bytes)?;
        Some(
            bytes
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as u32)
                .collect(),
        )
    } else {
        None
    };
    let mut provenance = vec![Vec::new(); n];
    for line in BufReader::new(File::open(dir.join("provenance.jsonl"))?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: ProvenanceLine = serde_json::from_str(&line)?;
        let mut chain = vec![p.anchor];
        chain.extend(p.matched);
        if p.sample >= n {
            return Err(Error::format(
                dir.join("provenance.jsonl").display().to_string(),
                format!("sample index {} out of range", p.sample),
            ));
        }
        provenance[p.sample] = chain;
    }
    Ok(PseudoPairedDataset {
        views,
        labels,
        similarities: sims.iter().map(|v| *v as f64).collect(),
        provenance,
        num_classes: manifest.num_classes,
    })
}
