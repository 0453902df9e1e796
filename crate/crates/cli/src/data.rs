//! Prepared-data directories: `manifest.json` plus one `IMG1` record per sample.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xraycnn_core::dataset::{prepare_dataset, read_sample, write_sample, PrepareConfig};
use xraycnn_core::{Error, Label, LabeledDataset, Lineage, Result};

pub const MANIFEST: &str = "manifest.json";
const SAMPLE_DIR: &str = "samples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub source_id: String,
    pub label: Label,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub side: usize,
    pub seed: u64,
    pub augment: bool,
    pub total: usize,
    pub classes: BTreeMap<String, usize>,
    pub lineages: BTreeMap<Lineage, usize>,
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    fn describe(ds: &LabeledDataset, augment: bool) -> Self {
        Self {
            side: ds.side,
            seed: ds.seed,
            augment,
            total: ds.len(),
            classes: ds.class_counts().into_iter().map(|(l, n)| (l.name().to_string(), n)).collect(),
            lineages: ds.lineage_counts(),
            samples: ds
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| ManifestEntry {
                    file: format!("{SAMPLE_DIR}/{i:06}.img"),
                    source_id: s.source_id.clone(),
                    label: s.label,
                    lineage: s.lineage,
                })
                .collect(),
        }
    }
}

pub fn is_prepared(dir: &Path) -> bool {
    dir.join(MANIFEST).is_file()
}

/// Ingests `input` and writes the prepared cache to `output`.
pub fn prepare(input: &Path, output: &Path, config: &PrepareConfig) -> Result<Manifest> {
    let ds = prepare_dataset(input, config)?;
    let manifest = Manifest::describe(&ds, config.augment);
    let samples = output.join(SAMPLE_DIR);
    std::fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
    for (entry, sample) in manifest.samples.iter().zip(&ds.samples) {
        let path = output.join(&entry.file);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        write_sample(&mut w, sample)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    let path = output.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::Layout {
            path: dir.to_path_buf(),
            reason: format!("no {MANIFEST}; run `prepare` first"),
        });
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt { path, reason: e.to_string() })
}

/// Loads a prepared directory, checking each record against the manifest.
pub fn load_prepared(dir: &Path) -> Result<LabeledDataset> {
    let manifest = read_manifest(dir)?;
    if manifest.samples.is_empty() {
        return Err(Error::Data(format!("prepared data at {} holds no samples", dir.display())));
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let path = dir.join(&entry.file);
        let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let s = read_sample(BufReader::new(f), &path, entry.source_id.clone())?;
        if s.label != entry.label || s.lineage != entry.lineage || s.image.width() != manifest.side {
            return Err(Error::Corrupt {
                path,
                reason: "record disagrees with manifest".into(),
            });
        }
        samples.push(s);
    }
    Ok(LabeledDataset::new(samples, manifest.side, manifest.seed))
}

/// A prepared directory as stored, or a raw `covid/` + `normal/` tree
/// ingested without augmentation at `side`.
pub fn load_any(dir: &Path, side: usize) -> Result<LabeledDataset> {
    if is_prepared(dir) {
        let ds = load_prepared(dir)?;
        if ds.side != side {
            return Err(Error::Data(format!(
                "prepared data has input size {}, model expects {side}",
                ds.side
            )));
        }
        Ok(ds)
    } else {
        let config = PrepareConfig { side, augment: false, ..Default::default() };
        prepare_dataset(dir, &config)
    }
}
