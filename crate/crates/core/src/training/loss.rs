use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Predictions are clamped into `[CLAMP, 1 - CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

fn check_pair<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    a.expect_rank(op, 2)?;
    if a.shape() != b.shape() {
        return Err(Error::shape(op, "targets", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Ok(())
}

/// One-hot `[B, 2]` targets; unit 1 is the positive class.
pub fn one_hot<T: Scalar>(labels: &[Label]) -> Tensor<T> {
    let mut t = Tensor::zeros(&[labels.len(), 2]);
    for (i, l) in labels.iter().enumerate() {
        t.data_mut()[i * 2 + l.index()] = T::one();
    }
    t
}

/// One-hot targets mapped to `+1` / `-1`.
pub fn signed_targets<T: Scalar>(labels: &[Label]) -> Tensor<T> {
    one_hot::<T>(labels).map(|x| x + x - T::one())
}

/// Mean binary cross-entropy over all `B*2` entries, and its gradient with
/// respect to the (clamped) predictions.
pub fn bce_loss<T: Scalar>(predictions: &Tensor<T>, targets: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    check_pair("bce_loss", predictions, targets)?;
    let n = T::from_f64(predictions.len().max(1) as f64);
    let lo = T::from_f64(BCE_CLAMP);
    let hi = T::one() - lo;
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(predictions.len());
    for (&p, &t) in predictions.data().iter().zip(targets.data()) {
        let p = p.max(lo).min(hi);
        let q = T::one() - p;
        loss += -(t * p.ln() + (T::one() - t) * q.ln());
        grad.push(-(t / p - (T::one() - t) / q) / n);
    }
    Ok((loss / n, Tensor::from_vec(predictions.shape(), grad)?))
}

/// Mean of `max(0, 1 - t*s)` over all `B*2` entries with `t` in `{-1, +1}`;
/// the subgradient is `-t/n` where the margin is violated, else 0.
pub fn hinge_loss<T: Scalar>(scores: &Tensor<T>, targets: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    check_pair("hinge_loss", scores, targets)?;
    let cols = scores.shape()[1];
    for (r, row) in targets.data().chunks(cols).enumerate() {
        let ok = row.iter().all(|&t| t == T::one() || t == -T::one())
            && row.iter().filter(|&&t| t == T::one()).count() == 1;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "hinge targets row {r} must be +/-1 with exactly one +1"
            )));
        }
    }
    let n = T::from_f64(scores.len().max(1) as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &t) in scores.data().iter().zip(targets.data()) {
        let margin = T::one() - t * s;
        if margin > T::zero() {
            loss += margin;
            grad.push(-t / n);
        } else {
            grad.push(T::zero());
        }
    }
    Ok((loss / n, Tensor::from_vec(scores.shape(), grad)?))
}
