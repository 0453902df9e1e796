//! Synthetic image sets with known class structure, for smoke tests, demos
//! and benchmarks.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, LabeledDataset, LabeledSample, Lineage};
use crate::error::{Error, Result};
use crate::imaging::{to_u8, GrayImage};

/// Positive: blocky random texture (dense edges). Negative: smooth linear ramp.
pub fn edge_density_image<R: Rng>(side: usize, label: Label, rng: &mut R) -> GrayImage {
    match label {
        Label::Positive => {
            let cell = rng.gen_range(2..=4usize);
            let cells = side.div_ceil(cell);
            let values: Vec<u8> = (0..cells * cells).map(|_| rng.gen_range(40..=215)).collect();
            GrayImage::from_fn(side, side, |x, y| values[(y / cell) * cells + x / cell])
        }
        Label::Negative => {
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let base: f64 = rng.gen_range(60.0..190.0);
            let slope = rng.gen_range(0.5..2.0) * 64.0 / side as f64;
            let c = side as f64 / 2.0;
            GrayImage::from_fn(side, side, |x, y| {
                let t = (x as f64 - c) * angle.cos() + (y as f64 - c) * angle.sin();
                to_u8(base + slope * t)
            })
        }
    }
}

/// Large low-frequency sinusoid plus offset, shared by both classes. Positives
/// add a few thin sharp lines; negatives add a soft blob of similar contrast.
pub fn edge_with_nuisance_image<R: Rng>(side: usize, label: Label, rng: &mut R) -> GrayImage {
    let s = side as f64;
    let offset: f64 = rng.gen_range(80.0..160.0);
    let amp: f64 = rng.gen_range(20.0..60.0);
    let freq: f64 = rng.gen_range(0.2..0.6);
    let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut field: Vec<f64> = (0..side * side)
        .map(|i| {
            let (x, y) = ((i % side) as f64, (i / side) as f64);
            let t = (x * dir.cos() + y * dir.sin()) / s;
            offset + amp * (std::f64::consts::TAU * freq * t + phase).sin()
        })
        .collect();
    match label {
        Label::Positive => {
            for _ in 0..3 {
                let contrast = rng.gen_range(35.0..60.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let len = rng.gen_range(side / 3..=2 * side / 3);
                let horizontal = rng.gen::<bool>();
                let a = rng.gen_range(1..side - 1);
                let b0 = rng.gen_range(0..side - len);
                for b in b0..b0 + len {
                    let (x, y) = if horizontal { (b, a) } else { (a, b) };
                    field[y * side + x] += contrast;
                }
            }
        }
        Label::Negative => {
            let contrast = rng.gen_range(35.0..60.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let (cx, cy) = (rng.gen_range(0.25..0.75) * s, rng.gen_range(0.25..0.75) * s);
            let sigma = s / 6.0;
            for (i, v) in field.iter_mut().enumerate() {
                let (x, y) = ((i % side) as f64 - cx, (i / side) as f64 - cy);
                *v += contrast * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    GrayImage::new(side, side, field.into_iter().map(to_u8).collect()).expect("square image")
}

/// `per_class` images of each class from `generator`, positives first.
pub fn labeled_images(
    per_class: usize,
    side: usize,
    seed: u64,
    generator: fn(usize, Label, &mut ChaCha8Rng) -> GrayImage,
) -> Vec<(Label, GrayImage)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [Label::Positive, Label::Negative]
        .into_iter()
        .flat_map(|l| std::iter::repeat_n(l, per_class))
        .map(|l| (l, generator(side, l, &mut rng)))
        .collect()
}

/// In-memory dataset of originals built from `labeled_images`.
pub fn dataset(
    per_class: usize,
    side: usize,
    seed: u64,
    generator: fn(usize, Label, &mut ChaCha8Rng) -> GrayImage,
) -> LabeledDataset {
    let samples = labeled_images(per_class, side, seed, generator)
        .into_iter()
        .enumerate()
        .map(|(i, (label, image))| LabeledSample {
            image,
            label,
            source_id: format!("{}/synthetic_{i:04}.png", label.name()),
            lineage: Lineage::Original,
        })
        .collect();
    LabeledDataset::new(samples, side, seed)
}

/// Writes images as PNG files under `<root>/covid` and `<root>/normal`.
pub fn write_image_dir(root: &Path, images: &[(Label, GrayImage)]) -> Result<()> {
    for label in [Label::Positive, Label::Negative] {
        let dir = root.join(label.name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for (i, (label, img)) in images.iter().enumerate() {
        let path = root.join(label.name()).join(format!("synthetic_{i:04}.png"));
        let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
            .expect("pixel count");
        buf.save(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    }
    Ok(())
}
