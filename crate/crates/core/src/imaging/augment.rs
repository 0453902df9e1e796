use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{to_u8, GrayImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Maximum shift as a fraction of the image extent along that axis.
    pub shift_fraction: f64,
    pub max_rotation_degrees: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift_fraction: 0.1,
            max_rotation_degrees: 15.0,
        }
    }
}

/// Random parameters used for one [`augment`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub dx: isize,
    pub dy: isize,
    pub degrees: f64,
}

/// Shifts content right by `k` columns (left if negative); vacated columns repeat the edge.
pub fn shift_x(image: &GrayImage, k: isize) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        image.get_clamped(x as isize - k, y as isize)
    })
}

/// Shifts content down by `k` rows (up if negative); vacated rows repeat the edge.
pub fn shift_y(image: &GrayImage, k: isize) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        image.get_clamped(x as isize, y as isize - k)
    })
}

/// Rotates counter-clockwise by `degrees` about the image center with bilinear
/// resampling; samples falling outside repeat the nearest edge.
pub fn rotate(image: &GrayImage, degrees: f64) -> GrayImage {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (image.width() as f64 - 1.0) / 2.0;
    let cy = (image.height() as f64 - 1.0) / 2.0;
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        let (px, py) = (x as f64 - cx, y as f64 - cy);
        // inverse map: rotate the output coordinate back by -theta (y axis points down)
        let sx = cos * px - sin * py + cx;
        let sy = sin * px + cos * py + cy;
        to_u8(image.sample_bilinear(sx, sy))
    })
}

fn max_shift(extent: usize, fraction: f64) -> isize {
    (extent as f64 * fraction).round() as isize
}

/// Draws the three augmentation parameters from `seed`.
pub fn draw(image: &GrayImage, seed: u64, config: &AugmentConfig) -> AugmentDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mx = max_shift(image.width(), config.shift_fraction);
    let my = max_shift(image.height(), config.shift_fraction);
    let dx = rng.gen_range(-mx..=mx);
    let dy = rng.gen_range(-my..=my);
    let r = config.max_rotation_degrees;
    let degrees = if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
    AugmentDraw { dx, dy, degrees }
}

/// One horizontally shifted, one vertically shifted and one rotated variant.
pub fn augment(image: &GrayImage, seed: u64, config: &AugmentConfig) -> Result<([GrayImage; 3], AugmentDraw)> {
    if !(0.0..1.0).contains(&config.shift_fraction) || !(0.0..=180.0).contains(&config.max_rotation_degrees) {
        return Err(Error::InvalidConfig(format!("augmentation ranges out of bounds: {config:?}")));
    }
    let d = draw(image, seed, config);
    Ok((
        [shift_x(image, d.dx), shift_y(image, d.dy), rotate(image, d.degrees)],
        d,
    ))
}
