//! Deterministic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xraycnn_core::Tensor;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape matches data")
}

pub fn random_scores(n: usize, seed: u64) -> (Vec<f64>, Vec<xraycnn_core::Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let positive = rng.gen_bool(0.25);
            let score = rng.gen_range(0.0..1.0) + if positive { 0.3 } else { 0.0 };
            let label = if positive { xraycnn_core::Label::Positive } else { xraycnn_core::Label::Negative };
            ((score * 100.0f64).round() / 100.0, label)
        })
        .unzip()
}
