//! Whole-network forward and backward passes.
//!
//! Layer order: for each conv block `conv -> ReLU -> max-pool`, then flatten,
//! then for each hidden dense layer `dense -> ReLU -> dropout`, then the
//! two-unit output layer and the head.

use rand::Rng;

use super::layers::{self, PoolIndex};
use super::params::ParamSet;
use super::spec::{Head, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvTrace<T> {
    pub input: Tensor<T>,
    pub pre_activation: Tensor<T>,
    pub pool: PoolIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrace<T> {
    pub input: Tensor<T>,
    /// Absent for the output layer, which has no activation.
    pub pre_activation: Option<Tensor<T>>,
    pub mask: Option<Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace<T> {
    pub conv: Vec<ConvTrace<T>>,
    pub dense: Vec<DenseTrace<T>>,
    pub head_output: Tensor<T>,
}

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    pub training: bool,
    pub head: Head,
    pub samples: Vec<SampleTrace<T>>,
}

fn check_batch<T: Scalar>(spec: &NetworkSpec, batch: &Tensor<T>) -> Result<usize> {
    let s = batch.shape();
    if s.len() != 4 {
        return Err(Error::shape("forward", "batch rank", 4, s.len()));
    }
    if s[1] != 1 {
        return Err(Error::shape("forward", "input channels", 1, s[1]));
    }
    if s[2] != spec.input_side || s[3] != spec.input_side {
        return Err(Error::shape(
            "forward",
            "input side",
            spec.input_side,
            format!("{}x{}", s[2], s[3]),
        ));
    }
    Ok(s[0])
}

fn forward_sample<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    image: Tensor<T>,
    training: bool,
    rng: &mut R,
) -> Result<SampleTrace<T>> {
    let n_conv = spec.conv_blocks.len();
    let mut x = image;
    let mut conv = Vec::with_capacity(n_conv);
    for (block, p) in spec.conv_blocks.iter().zip(&params.layers[..n_conv]) {
        let pre = layers::conv2d_forward(&x, &p.weight, &p.bias)?;
        let act = layers::relu(&pre);
        let (pooled, pool) = layers::maxpool2d_forward(&act, block.pool_side)?;
        conv.push(ConvTrace {
            input: x,
            pre_activation: pre,
            pool,
        });
        x = pooled;
    }
    let len = x.len();
    let mut x = x.reshape(&[len])?;
    let dense_params = &params.layers[n_conv..];
    let last = dense_params.len() - 1;
    let mut dense = Vec::with_capacity(dense_params.len());
    for (i, p) in dense_params.iter().enumerate() {
        let pre = layers::dense_forward(&x, &p.weight, &p.bias)?;
        if i == last {
            dense.push(DenseTrace {
                input: x,
                pre_activation: None,
                mask: None,
            });
            x = pre;
        } else {
            let act = layers::relu(&pre);
            let (out, mask) = layers::dropout(&act, spec.dropout_rate, training, rng)?;
            dense.push(DenseTrace {
                input: x,
                pre_activation: Some(pre),
                mask: Some(mask),
            });
            x = out;
        }
    }
    let head_output = match spec.head {
        Head::Sigmoid => layers::sigmoid(&x),
        Head::Svm => x,
    };
    Ok(SampleTrace {
        conv,
        dense,
        head_output,
    })
}

/// Runs a `[B, 1, S, S]` batch. Returns the `[B, 2]` head outputs and the trace.
///
/// The RNG is only consumed in training mode (dropout masks).
pub fn forward<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, ForwardTrace<T>)> {
    params.check_against(spec)?;
    let b = check_batch(spec, batch)?;
    let side = spec.input_side;
    let mut samples = Vec::with_capacity(b);
    let mut out = Vec::with_capacity(b * spec.output_units);
    for i in 0..b {
        let image = Tensor::from_vec(&[1, side, side], batch.row(i).to_vec())?;
        let s = forward_sample(spec, params, image, training, rng)?;
        out.extend_from_slice(s.head_output.data());
        samples.push(s);
    }
    Ok((
        Tensor::from_vec(&[b, spec.output_units], out)?,
        ForwardTrace {
            training,
            head: spec.head,
            samples,
        },
    ))
}

/// Inference-mode outputs for a single `[1, S, S]` image.
pub fn predict_one<T: Scalar>(spec: &NetworkSpec, params: &ParamSet<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
    let side = spec.input_side;
    if image.shape() != [1, side, side] {
        return Err(Error::shape(
            "predict",
            "input side",
            format!("[1, {side}, {side}]"),
            format!("{:?}", image.shape()),
        ));
    }
    // inference never draws from the rng
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    Ok(forward_sample(spec, params, image.clone(), false, &mut rng)?.head_output)
}

/// Gradient of the forward outputs contracted with `output_grad`, averaged
/// over the batch: `(1/B) * sum_b J_b^T output_grad[b]`.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    trace: &ForwardTrace<T>,
    output_grad: &Tensor<T>,
) -> Result<ParamSet<T>> {
    params.check_against(spec)?;
    let b = trace.samples.len();
    if trace.head != spec.head {
        return Err(Error::Trace("trace head differs from spec head".into()));
    }
    if output_grad.shape() != [b, spec.output_units] {
        return Err(Error::shape(
            "backward",
            "output gradient",
            format!("[{b}, {}]", spec.output_units),
            format!("{:?}", output_grad.shape()),
        ));
    }
    let n_conv = spec.conv_blocks.len();
    let mut grads = params.zeros_like();
    for (i, sample) in trace.samples.iter().enumerate() {
        if sample.conv.len() != n_conv || sample.dense.len() != params.layers.len() - n_conv {
            return Err(Error::Trace(format!("sample {i}: layer count differs from spec")));
        }
        let mut g = Tensor::from_vec(&[spec.output_units], output_grad.row(i).to_vec())?;
        if spec.head == Head::Sigmoid {
            for (gj, &s) in g.data_mut().iter_mut().zip(sample.head_output.data()) {
                *gj *= s * (T::one() - s);
            }
        }
        for (j, dt) in sample.dense.iter().enumerate().rev() {
            let layer = n_conv + j;
            if let (Some(pre), Some(mask)) = (&dt.pre_activation, &dt.mask) {
                g = layers::dropout_backward(mask, spec.dropout_rate, &g)?;
                g = layers::relu_backward(pre, &g)?;
            }
            let dg = layers::dense_backward(&dt.input, &params.layers[layer].weight, &g)?;
            grads.layers[layer].weight.add_scaled(&dg.weights, T::one());
            grads.layers[layer].bias.add_scaled(&dg.bias, T::one());
            g = dg.input;
        }
        for (j, ct) in sample.conv.iter().enumerate().rev() {
            let [c, h, w] = ct.pool.input_shape;
            let pooled_shape = [c, h / spec.conv_blocks[j].pool_side, w / spec.conv_blocks[j].pool_side];
            let g_pooled = g.reshape(&pooled_shape)?;
            let g_act = layers::maxpool2d_backward(&ct.pool, &g_pooled)?;
            let g_pre = layers::relu_backward(&ct.pre_activation, &g_act)?;
            let cg = layers::conv2d_backward(&ct.input, &params.layers[j].weight, &g_pre)?;
            grads.layers[j].weight.add_scaled(&cg.kernels, T::one());
            grads.layers[j].bias.add_scaled(&cg.bias, T::one());
            g = cg.input;
        }
    }
    if b > 0 {
        grads.scale(T::one() / T::from_f64(b as f64));
    }
    Ok(grads)
}
