//! Forward and backward passes of the individual layers.
//!
//! Convolutions are valid (no padding), stride 1, in the cross-correlation
//! convention, and are lowered to a matrix product over an im2col buffer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Scalar, Tensor, Trans};

fn conv_dims<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize)> {
    input.expect_rank(op, 3)?;
    kernels.expect_rank(op, 4)?;
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let ks = kernels.shape();
    if ks[1] != c {
        return Err(Error::shape(op, "kernel channels", c, ks[1]));
    }
    if ks[2] != ks[3] {
        return Err(Error::shape(op, "kernel width", ks[2], ks[3]));
    }
    let k = ks[2];
    if h < k {
        return Err(Error::shape(op, "input height", format!(">= {k}"), h));
    }
    if w < k {
        return Err(Error::shape(op, "input width", format!(">= {k}"), w));
    }
    Ok((c, h, w, ks[0], k))
}

/// `cols[(c*k + u)*k + v][i*wo + j] = input[c, i+u, j+v]`.
fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let mut cols = vec![T::zero(); c * k * k * ho * wo];
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = ((ch * k + u) * k + v) * ho * wo;
                for i in 0..ho {
                    let src = &plane[(i + u) * w + v..(i + u) * w + v + wo];
                    cols[row + i * wo..row + (i + 1) * wo].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds column gradients back onto the input grid.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let plane = &mut out[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = ((ch * k + u) * k + v) * ho * wo;
                for i in 0..ho {
                    let dst = &mut plane[(i + u) * w + v..(i + u) * w + v + wo];
                    for (d, &s) in dst.iter_mut().zip(&cols[row + i * wo..row + (i + 1) * wo]) {
                        *d += s;
                    }
                }
            }
        }
    }
    out
}

/// `out[k,i,j] = bias[k] + sum_{c,u,v} input[c,i+u,j+v] * kernels[k,c,u,v]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c, h, w, kc, k) = conv_dims("conv2d_forward", input, kernels)?;
    if bias.shape() != [kc] {
        return Err(Error::shape("conv2d_forward", "bias length", kc, format!("{:?}", bias.shape())));
    }
    let (ho, wo) = (h - k + 1, w - k + 1);
    let cols = im2col(input.data(), c, h, w, k);
    let mut out = Vec::with_capacity(kc * ho * wo);
    for &b in bias.data() {
        out.extend(std::iter::repeat_n(b, ho * wo));
    }
    gemm(kc, c * k * k, ho * wo, kernels.data(), Trans::No, &cols, Trans::No, T::one(), &mut out);
    Tensor::from_vec(&[kc, ho, wo], out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (c, h, w, kc, k) = conv_dims("conv2d_backward", input, kernels)?;
    let (ho, wo) = (h - k + 1, w - k + 1);
    if upstream.shape() != [kc, ho, wo] {
        return Err(Error::shape(
            "conv2d_backward",
            "upstream gradient",
            format!("{:?}", [kc, ho, wo]),
            format!("{:?}", upstream.shape()),
        ));
    }
    let patch = c * k * k;
    let cols = im2col(input.data(), c, h, w, k);
    let up = upstream.data();

    let mut kernel_grad = vec![T::zero(); kc * patch];
    gemm(kc, ho * wo, patch, up, Trans::No, &cols, Trans::Yes, T::zero(), &mut kernel_grad);

    let mut cols_grad = vec![T::zero(); patch * ho * wo];
    gemm(patch, kc, ho * wo, kernels.data(), Trans::Yes, up, Trans::No, T::zero(), &mut cols_grad);

    let bias_grad = up.chunks(ho * wo).map(|r| r.iter().copied().sum()).collect();
    Ok(ConvGrads {
        input: Tensor::from_vec(&[c, h, w], col2im(&cols_grad, c, h, w, k))?,
        kernels: Tensor::from_vec(kernels.shape(), kernel_grad)?,
        bias: Tensor::from_vec(&[kc], bias_grad)?,
    })
}

/// Winning input positions of a max-pool, needed to route gradients back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndex {
    pub input_shape: [usize; 3],
    /// Flat index into the input for every output cell.
    pub argmax: Vec<usize>,
}

/// Max over disjoint `pool x pool` windows; a trailing partial row/column is dropped.
/// Ties go to the first maximum in row-major order.
pub fn maxpool2d_forward<T: Scalar>(input: &Tensor<T>, pool: usize) -> Result<(Tensor<T>, PoolIndex)> {
    input.expect_rank("maxpool2d_forward", 3)?;
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if pool == 0 || h < pool {
        return Err(Error::shape("maxpool2d_forward", "input height", format!(">= {pool}"), h));
    }
    if w < pool {
        return Err(Error::shape("maxpool2d_forward", "input width", format!(">= {pool}"), w));
    }
    let (ho, wo) = (h / pool, w / pool);
    let x = input.data();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut argmax = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = ch * h * w + (i * pool) * w + j * pool;
                for u in 0..pool {
                    for v in 0..pool {
                        let idx = ch * h * w + (i * pool + u) * w + j * pool + v;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[c, ho, wo], out)?,
        PoolIndex {
            input_shape: [c, h, w],
            argmax,
        },
    ))
}

pub fn maxpool2d_backward<T: Scalar>(index: &PoolIndex, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.len() != index.argmax.len() {
        return Err(Error::shape(
            "maxpool2d_backward",
            "upstream length",
            index.argmax.len(),
            upstream.len(),
        ));
    }
    let mut grad = Tensor::zeros(&index.input_shape);
    let n = grad.len();
    let g = grad.data_mut();
    for (&pos, &u) in index.argmax.iter().zip(upstream.data()) {
        if pos >= n {
            return Err(Error::Trace(format!("pool argmax {pos} out of range for {n} inputs")));
        }
        g[pos] += u;
    }
    Ok(grad)
}

fn dense_dims<T: Scalar>(op: &'static str, input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    weights.expect_rank(op, 2)?;
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != n {
        return Err(Error::shape(op, "input length", n, input.len()));
    }
    Ok((m, n))
}

/// `out = weights * input + bias`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dense_dims("dense_forward", input, weights)?;
    if bias.len() != m {
        return Err(Error::shape("dense_forward", "bias length", m, bias.len()));
    }
    let out = weights
        .data()
        .chunks(n)
        .zip(bias.data())
        .map(|(row, &b)| b + row.iter().zip(input.data()).map(|(&a, &x)| a * x).sum::<T>())
        .collect();
    Tensor::from_vec(&[m], out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (m, n) = dense_dims("dense_backward", input, weights)?;
    if upstream.len() != m {
        return Err(Error::shape("dense_backward", "upstream length", m, upstream.len()));
    }
    let x = input.data();
    let up = upstream.data();
    let mut wg = Vec::with_capacity(m * n);
    for &u in up {
        wg.extend(x.iter().map(|&xi| u * xi));
    }
    let mut ig = vec![T::zero(); n];
    for (row, &u) in weights.data().chunks(n).zip(up) {
        for (g, &a) in ig.iter_mut().zip(row) {
            *g += a * u;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[n], ig)?,
        weights: Tensor::from_vec(&[m, n], wg)?,
        bias: upstream.clone().reshape(&[m])?,
    })
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Passes `upstream` where `input > 0`; the subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.len() != upstream.len() {
        return Err(Error::shape("relu_backward", "length", input.len(), upstream.len()));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| if x > T::zero() { u } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted dropout. Returns the output and the keep mask (1 kept, 0 dropped).
/// In inference mode the input passes through unchanged and the mask is all ones.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), Tensor::filled(input.shape(), T::one())));
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { T::one() })
        .collect();
    let out = input
        .data()
        .iter()
        .zip(&mask)
        .map(|(&x, &m)| x * m * scale)
        .collect();
    Ok((Tensor::from_vec(input.shape(), out)?, Tensor::from_vec(input.shape(), mask)?))
}

pub fn dropout_backward<T: Scalar>(mask: &Tensor<T>, rate: f64, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    check_rate(rate)?;
    if mask.len() != upstream.len() {
        return Err(Error::shape("dropout_backward", "length", mask.len(), upstream.len()));
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let data = mask
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&m, &u)| u * m * scale)
        .collect();
    Tensor::from_vec(upstream.shape(), data)
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}
