use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Dense,
}

/// Weight and bias of one learnable layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub name: String,
    pub kind: LayerKind,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// All learnable tensors, in declaration order: conv1.., dense1.., output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub layers: Vec<LayerParams<T>>,
}

/// `(name, kind, weight shape, bias shape)`.
pub type LayerShape = (String, LayerKind, Vec<usize>, Vec<usize>);

/// Expected shapes of each layer, in declaration order.
pub fn layer_shapes(spec: &NetworkSpec) -> Result<Vec<LayerShape>> {
    let geometry = spec.geometry()?;
    let mut out = Vec::new();
    for (i, (g, b)) in geometry.iter().zip(&spec.conv_blocks).enumerate() {
        out.push((
            format!("conv{}", i + 1),
            LayerKind::Conv,
            vec![b.kernel_count, g.in_channels, b.kernel_side, b.kernel_side],
            vec![b.kernel_count],
        ));
    }
    let dense = spec.dense_shapes()?;
    let last = dense.len() - 1;
    for (i, &(m, n)) in dense.iter().enumerate() {
        let name = if i == last {
            "output".to_string()
        } else {
            format!("dense{}", i + 1)
        };
        out.push((name, LayerKind::Dense, vec![m, n], vec![m]));
    }
    Ok(out)
}

/// Glorot-uniform limit `sqrt(6 / (fan_in + fan_out))` for a weight shape.
///
/// Conv kernels `[K, C, k, k]` use `fan_in = C*k*k`, `fan_out = K*k*k`.
pub fn glorot_limit(weight_shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match weight_shape {
        [m, n] => (*n, *m),
        [k, c, h, w] => (c * h * w, k * h * w),
        _ => panic!("glorot_limit: unsupported rank {}", weight_shape.len()),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights, zero biases. The same seed gives bit-identical parameters.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<ParamSet<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_shapes(spec)?
        .into_iter()
        .map(|(name, kind, wshape, bshape)| {
            let limit = glorot_limit(&wshape);
            let n: usize = wshape.iter().product();
            let data = (0..n)
                .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
                .collect();
            LayerParams {
                name,
                kind,
                weight: Tensor::from_vec(&wshape, data).expect("shape product"),
                bias: Tensor::zeros(&bshape),
            }
        })
        .collect();
    Ok(ParamSet { layers })
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    name: l.name.clone(),
                    kind: l.kind,
                    weight: Tensor::zeros(l.weight.shape()),
                    bias: Tensor::zeros(l.bias.shape()),
                })
                .collect(),
        }
    }

    /// Checks every tensor shape against `spec`.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let shapes = layer_shapes(spec)?;
        if shapes.len() != self.layers.len() {
            return Err(Error::shape(
                "params",
                "layer count",
                shapes.len(),
                self.layers.len(),
            ));
        }
        for ((_, kind, w, b), l) in shapes.iter().zip(&self.layers) {
            if l.kind != *kind || l.weight.shape() != w.as_slice() || l.bias.shape() != b.as_slice() {
                return Err(Error::shape(
                    "params",
                    "layer tensor",
                    format!("{w:?}/{b:?}"),
                    format!("{:?}/{:?} ({})", l.weight.shape(), l.bias.shape(), l.name),
                ));
            }
        }
        Ok(())
    }

    /// Tensors in declaration order: each layer's weight, then its bias.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    name: l.name.clone(),
                    kind: l.kind,
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Self, alpha: T) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.add_scaled(b, alpha);
        }
    }

    pub fn scale(&mut self, alpha: T) {
        self.tensors_mut().for_each(|t| t.scale(alpha));
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(Tensor::all_finite)
    }

    /// Rebuilds a parameter set for `spec` from a flat value stream in declaration order.
    pub fn from_flat(spec: &NetworkSpec, values: &[T]) -> Result<Self> {
        let shapes = layer_shapes(spec)?;
        let total: usize = shapes
            .iter()
            .map(|(_, _, w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum();
        if total != values.len() {
            return Err(Error::shape("params", "value count", total, values.len()));
        }
        let mut offset = 0;
        let mut take = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            let t = Tensor::from_vec(shape, values[offset..offset + n].to_vec()).expect("sized");
            offset += n;
            t
        };
        let layers = shapes
            .iter()
            .map(|(name, kind, w, b)| LayerParams {
                name: name.clone(),
                kind: *kind,
                weight: take(w),
                bias: take(b),
            })
            .collect();
        Ok(Self { layers })
    }
}
