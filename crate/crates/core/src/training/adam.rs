use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment estimates, one tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_params(params: &ParamSet<T>) -> Self {
        let zeros: Vec<_> = params.tensors().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    let n = state.first.len();
    if params.tensors().count() != n || grads.tensors().count() != n {
        return Err(Error::shape("adam_step", "tensor count", n, params.tensors().count()));
    }
    for ((p, g), m) in params.tensors().zip(grads.tensors()).zip(&state.first) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::shape(
                "adam_step",
                "parameter tensor",
                format!("{:?}", m.shape()),
                format!("{:?}/{:?}", p.shape(), g.shape()),
            ));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(config.beta1);
    let b2 = T::from_f64(config.beta2);
    let c1 = T::from_f64(1.0 - config.beta1.powi(t));
    let c2 = T::from_f64(1.0 - config.beta2.powi(t));
    let lr = T::from_f64(config.learning_rate);
    let eps = T::from_f64(config.epsilon);
    let one = T::one();
    for (((p, g), m), v) in params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi = *pi - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
