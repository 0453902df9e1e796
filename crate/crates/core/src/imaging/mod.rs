//! Grayscale image handling: decoding, resizing, Sobel edges, augmentation,
//! and conversion to network input tensors.

mod augment;
mod sobel;

use std::path::Path;

pub use augment::{augment, rotate, shift_x, shift_y, AugmentConfig, AugmentDraw};
pub use sobel::{sobel, sobel_magnitude, SobelMagnitude};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::Data(format!(
                "image {width}x{height} does not match {} pixels",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at `(x, y)` with coordinates clamped to the image (edge replication).
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Bilinear sample at real coordinates, clamped to the pixel-center grid.
    pub(crate) fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p = |xx, yy| self.get(xx, yy) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 luminance, rounded to the nearest integer.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    to_u8(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
}

/// Decodes a PNG or JPEG file to 8-bit luminance.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    if !path.is_file() {
        return Err(Error::MissingFile { path: path.to_path_buf() });
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = image::guess_format(&bytes).map_err(|_| Error::UnsupportedFormat { path: path.to_path_buf() })?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::UnsupportedFormat { path: path.to_path_buf() });
    }
    let decoded = image::load_from_memory_with_format(&bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(_) => Error::UnsupportedFormat { path: path.to_path_buf() },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other if !other.color().has_color() => other.to_luma8().into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage::new(w, h, pixels)
}

/// Bilinear resize to `side x side` with half-pixel-center alignment.
pub fn resize_bilinear(image: &GrayImage, side: usize) -> Result<GrayImage> {
    if side < 2 {
        return Err(Error::InvalidConfig(format!("resize target side must be >= 2, got {side}")));
    }
    if image.width == side && image.height == side {
        return Ok(image.clone());
    }
    let sx = image.width as f64 / side as f64;
    let sy = image.height as f64 / side as f64;
    Ok(GrayImage::from_fn(side, side, |x, y| {
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        to_u8(image.sample_bilinear(src_x, src_y))
    }))
}

/// `pixel / 255` as a `[1, H, W]` tensor.
pub fn normalize<T: Scalar>(image: &GrayImage) -> Tensor<T> {
    let scale = T::from_f64(1.0 / 255.0);
    let data = image.pixels.iter().map(|&p| T::from_f64(p as f64) * scale).collect();
    Tensor::from_vec(&[1, image.height, image.width], data).expect("pixel count")
}

/// Per-arm preprocessing: optional Sobel edges, then normalization.
pub fn to_network_input<T: Scalar>(image: &GrayImage, use_sobel: bool) -> Result<Tensor<T>> {
    if use_sobel {
        Ok(normalize(&sobel(image)?))
    } else {
        Ok(normalize(image))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn bt601_red() {
        assert_eq!(luminance(255, 0, 0), 76);
        assert_eq!(luminance(255, 255, 255), 255);
        assert_eq!(luminance(0, 0, 0), 0);
    }

    #[test]
    fn grayscale_png_decodes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let raw: Vec<u8> = (0..48u32).map(|i| (i * 5 % 256) as u8).collect();
        image::GrayImage::from_raw(8, 6, raw.clone()).unwrap().save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (8, 6));
        assert_eq!(img.pixels(), raw.as_slice());
    }

    #[test]
    fn rgb_png_uses_bt601() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        image::RgbImage::from_pixel(3, 3, image::Rgb([255, 0, 0])).save(&path).unwrap();
        assert!(load_image(&path).unwrap().pixels().iter().all(|&p| p == 76));
    }

    #[test]
    fn white_jpeg_is_white() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.jpg");
        image::RgbImage::from_pixel(16, 16, image::Rgb([255, 255, 255])).save(&path).unwrap();
        assert!(load_image(&path).unwrap().pixels().iter().all(|&p| p >= 254));
    }

    #[test]
    fn load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_image(&missing), Err(Error::MissingFile { .. })));

        let text = dir.path().join("notes.png");
        std::fs::write(&text, b"definitely not an image").unwrap();
        assert!(matches!(load_image(&text), Err(Error::UnsupportedFormat { .. })));

        let bmp = dir.path().join("x.bmp");
        std::fs::write(&bmp, b"BM\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_image(&bmp), Err(Error::UnsupportedFormat { .. })));

        let good = dir.path().join("t.png");
        image::GrayImage::from_pixel(32, 32, image::Luma([9])).save(&good).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let trunc = dir.path().join("trunc.png");
        std::fs::File::create(&trunc).unwrap().write_all(&bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&trunc), Err(Error::CorruptImage { .. })));
    }

    #[test]
    fn resize_constant_and_identity() {
        let c = GrayImage::filled(7, 5, 93);
        let r = resize_bilinear(&c, 11).unwrap();
        assert!(r.pixels().iter().all(|&p| p == 93));
        let img = GrayImage::from_fn(6, 6, |x, y| (x * 40 + y) as u8);
        assert_eq!(resize_bilinear(&img, 6).unwrap(), img);
        assert!(resize_bilinear(&img, 1).is_err());
    }

    #[test]
    fn resize_two_by_two_to_four() {
        let img = GrayImage::new(2, 2, vec![0, 100, 100, 200]).unwrap();
        let out = resize_bilinear(&img, 4).unwrap();
        // source coordinate of output index i: (i + 0.5) / 2 - 0.5, clamped to [0, 1]
        let coord = [0.0, 0.25, 0.75, 1.0];
        for y in 0..4 {
            for x in 0..4 {
                let (fx, fy): (f64, f64) = (coord[x], coord[y]);
                let expected = 0.0 * (1.0 - fx) * (1.0 - fy)
                    + 100.0 * fx * (1.0 - fy)
                    + 100.0 * (1.0 - fx) * fy
                    + 200.0 * fx * fy;
                assert_eq!(out.get(x, y) as f64, expected, "({x},{y})");
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let t = normalize::<f64>(&GrayImage::filled(3, 3, 255));
        assert!(t.data().iter().all(|&v| v == 1.0));
        let t = normalize::<f64>(&GrayImage::filled(3, 3, 0));
        assert!(t.data().iter().all(|&v| v == 0.0));
        let t = normalize::<f64>(&GrayImage::filled(1, 1, 51));
        assert!((t.data()[0] - 0.2).abs() < 1e-15);
        assert_eq!(t.shape(), &[1, 1, 1]);
    }
}
