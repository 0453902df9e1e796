use super::{to_u8, GrayImage};
use crate::error::{Error, Result};

/// Raw (unscaled) Sobel gradient magnitude, same size as the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelMagnitude {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SobelMagnitude {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Mirror index without repeating the edge sample: -1 -> 1, n -> n-2.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Horizontal and vertical Sobel responses at every pixel (reflect borders).
pub fn sobel_gradients(image: &GrayImage) -> Result<(Vec<i32>, Vec<i32>)> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall { width: w, height: h, min: 3 });
    }
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        let rows = [reflect(y as isize - 1, h), y, reflect(y as isize + 1, h)];
        for x in 0..w {
            let cols = [reflect(x as isize - 1, w), x, reflect(x as isize + 1, w)];
            let p = |r: usize, c: usize| image.get(cols[c], rows[r]) as i32;
            gx.push((p(0, 2) + 2 * p(1, 2) + p(2, 2)) - (p(0, 0) + 2 * p(1, 0) + p(2, 0)));
            gy.push((p(2, 0) + 2 * p(2, 1) + p(2, 2)) - (p(0, 0) + 2 * p(0, 1) + p(0, 2)));
        }
    }
    Ok((gx, gy))
}

/// `sqrt(Gx^2 + Gy^2)` before any rescaling.
pub fn sobel_magnitude(image: &GrayImage) -> Result<SobelMagnitude> {
    let (gx, gy) = sobel_gradients(image)?;
    let values = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| ((a * a + b * b) as f64).sqrt())
        .collect();
    Ok(SobelMagnitude {
        width: image.width(),
        height: image.height(),
        values,
    })
}

/// Sobel edge image, linearly rescaled so its maximum maps to 255.
/// A flat image maps to all zeros.
pub fn sobel(image: &GrayImage) -> Result<GrayImage> {
    let mag = sobel_magnitude(image)?;
    let max = mag.values.iter().copied().fold(0.0, f64::max);
    let pixels = if max == 0.0 {
        vec![0; mag.values.len()]
    } else {
        mag.values.iter().map(|&m| to_u8(m * 255.0 / max)).collect()
    };
    GrayImage::new(mag.width, mag.height, pixels)
}
