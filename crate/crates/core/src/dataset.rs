//! Labeled datasets: directory ingestion, the x4 augmentation expansion,
//! and the per-sample `IMG1` cache format.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{self, AugmentConfig, GrayImage};

/// Subdirectory holding positive (COVID-19) images.
pub const POSITIVE_DIR: &str = "covid";
/// Subdirectory holding negative (normal) images.
pub const NEGATIVE_DIR: &str = "normal";

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// Normal subject; output unit 0.
    Negative,
    /// COVID-19; output unit 1.
    Positive,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Negative => NEGATIVE_DIR,
            Label::Positive => POSITIVE_DIR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineage {
    Original,
    ShiftX,
    ShiftY,
    Rotation,
}

impl Lineage {
    pub const ALL: [Lineage; 4] = [Lineage::Original, Lineage::ShiftX, Lineage::ShiftY, Lineage::Rotation];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    /// Resized image; Sobel and normalization are applied per experiment arm.
    pub image: GrayImage,
    pub label: Label,
    /// Path of the originating file, relative to the dataset root.
    pub source_id: String,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<LabeledSample>,
    pub side: usize,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn new(samples: Vec<LabeledSample>, side: usize, seed: u64) -> Self {
        Self { samples, side, seed }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        count_by(&self.samples, |s| s.label)
    }

    pub fn lineage_counts(&self) -> BTreeMap<Lineage, usize> {
        count_by(&self.samples, |s| s.lineage)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        require_both_classes(&self.samples)
    }
}

pub(crate) fn count_by<K: Ord>(samples: &[LabeledSample], key: impl Fn(&LabeledSample) -> K) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for s in samples {
        *m.entry(key(s)).or_insert(0) += 1;
    }
    m
}

pub(crate) fn require_both_classes(samples: &[LabeledSample]) -> Result<()> {
    let pos = samples.iter().filter(|s| s.label == Label::Positive).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::Data(format!(
            "need both classes, got {pos} positive and {} negative samples",
            samples.len() - pos
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub side: usize,
    pub seed: u64,
    pub augment: bool,
    pub augmentation: AugmentConfig,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            side: 64,
            seed: 0,
            augment: true,
            augmentation: AugmentConfig::default(),
        }
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Image files directly under `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Layout {
            path: dir.to_path_buf(),
            reason: "missing class directory".into(),
        });
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ok = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ok {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyClass { path: dir.to_path_buf() });
    }
    Ok(files)
}

/// Loads `<root>/covid` and `<root>/normal`. Each original is converted to
/// luminance, optionally expanded with three augmented variants on the raw
/// image, and every image is resized to `config.side`.
///
/// Output order is deterministic: sorted by path (covid before normal),
/// each original followed by its variants.
pub fn prepare_dataset(root: &Path, config: &PrepareConfig) -> Result<LabeledDataset> {
    if !root.is_dir() {
        return Err(Error::Layout {
            path: root.to_path_buf(),
            reason: "dataset root is not a directory".into(),
        });
    }
    let mut originals = Vec::new();
    for label in [Label::Positive, Label::Negative] {
        for path in list_images(&root.join(label.name()))? {
            originals.push((label, path));
        }
    }
    let per_original: Vec<Result<Vec<LabeledSample>>> = originals
        .par_iter()
        .enumerate()
        .map(|(i, (label, path))| {
            let raw = imaging::load_image(path)?;
            let source_id = path
                .strip_prefix(root)
                .unwrap_or(path)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let mut variants = vec![(Lineage::Original, raw.clone())];
            if config.augment {
                let ([sx, sy, rot], _) =
                    imaging::augment(&raw, derive_seed(config.seed, i as u64), &config.augmentation)?;
                variants.extend([(Lineage::ShiftX, sx), (Lineage::ShiftY, sy), (Lineage::Rotation, rot)]);
            }
            variants
                .into_iter()
                .map(|(lineage, img)| {
                    Ok(LabeledSample {
                        image: imaging::resize_bilinear(&img, config.side)?,
                        label: *label,
                        source_id: source_id.clone(),
                        lineage,
                    })
                })
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(originals.len() * 4);
    for r in per_original {
        samples.extend(r?);
    }
    Ok(LabeledDataset::new(samples, config.side, config.seed))
}

const IMG_MAGIC: &[u8; 4] = b"IMG1";

/// `IMG1` magic, u16 side, u8 label, u8 lineage code, then side^2 little-endian f32 pixel values (0..=255).
pub fn write_sample<W: Write>(mut w: W, sample: &LabeledSample) -> std::io::Result<()> {
    let side = sample.image.width();
    assert_eq!(side, sample.image.height(), "cached samples are square");
    w.write_all(IMG_MAGIC)?;
    w.write_all(&(side as u16).to_le_bytes())?;
    w.write_all(&[sample.label.index() as u8, sample.lineage.code()])?;
    for &p in sample.image.pixels() {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads one `IMG1` record; `source_id` is not part of the record and is supplied by the caller.
pub fn read_sample<R: Read>(mut r: R, path: &Path, source_id: String) -> Result<LabeledSample> {
    let corrupt = |reason: &str| Error::Corrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut header = [0u8; 8];
    r.read_exact(&mut header).map_err(|_| corrupt("truncated header"))?;
    if &header[..4] != IMG_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let side = u16::from_le_bytes([header[4], header[5]]) as usize;
    let label = Label::from_index(header[6] as usize).ok_or_else(|| corrupt("bad label code"))?;
    let lineage = Lineage::from_code(header[7]).ok_or_else(|| corrupt("bad lineage code"))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    if body.len() != side * side * 4 {
        return Err(corrupt("pixel payload length does not match side"));
    }
    let mut pixels = Vec::with_capacity(side * side);
    for chunk in body.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
            return Err(corrupt("pixel value outside 0..=255"));
        }
        pixels.push(v as u8);
    }
    Ok(LabeledSample {
        image: GrayImage::new(side, side, pixels)?,
        label,
        source_id,
        lineage,
    })
}
