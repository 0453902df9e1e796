//! Losses, the Adam optimizer, and the per-fold training loop.

pub mod adam;
pub mod loss;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{bce_loss, hinge_loss, one_hot, signed_targets};

use crate::dataset::{derive_seed, require_both_classes, Label, LabeledSample};
use crate::error::{Error, Result};
use crate::imaging::to_network_input;
use crate::nn::{self, init_params, Head, NetworkSpec, ParamSet};
use crate::tensor::{Scalar, Tensor};

/// How cross-validation folds relate to augmented samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageMode {
    /// Folds drawn over every prepared sample; augmented siblings may straddle train and test.
    PaperFaithful,
    /// Folds drawn over originals; test folds hold originals only and training
    /// folds hold the remaining originals plus their augmented variants.
    LeakFree,
}

impl std::str::FromStr for LeakageMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-faithful" => Ok(Self::PaperFaithful),
            "leak-free" => Ok(Self::LeakFree),
            other => Err(Error::InvalidConfig(format!("unknown leakage mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub validation_fraction: f64,
    pub sobel: bool,
    pub seed: u64,
    pub folds: usize,
    pub leakage_mode: LeakageMode,
    /// Stratified folds when true, plain shuffled k-fold otherwise.
    pub stratified: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            validation_fraction: 0.2,
            sobel: false,
            seed: 0,
            folds: 10,
            leakage_mode: LeakageMode::LeakFree,
            stratified: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_epsilon <= 0.0 {
            return Err(Error::InvalidConfig("adam constants out of range".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds must be >= 2, got {}", self.folds)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Per-epoch loss/accuracy series of one fold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Loss of `outputs` against `labels` for the given head, with its gradient.
pub fn head_loss<T: Scalar>(head: Head, outputs: &Tensor<T>, labels: &[Label]) -> Result<(T, Tensor<T>)> {
    match head {
        Head::Sigmoid => bce_loss(outputs, &one_hot(labels)),
        Head::Svm => hinge_loss(outputs, &signed_targets(labels)),
    }
}

/// Predicted class: argmax of the two outputs, ties going to the negative class.
pub fn predicted_label<T: Scalar>(row: &[T]) -> Label {
    if row[1] > row[0] {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Stacks `[1, S, S]` images into a `[B, 1, S, S]` batch.
pub fn stack<T: Scalar>(images: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let shape = images.first().map(|t| t.shape().to_vec()).unwrap_or_else(|| vec![1, 1, 1]);
    let mut data = Vec::with_capacity(images.len() * shape.iter().product::<usize>());
    for t in images {
        if t.shape() != shape.as_slice() {
            return Err(Error::shape("stack", "image shape", format!("{shape:?}"), format!("{:?}", t.shape())));
        }
        data.extend_from_slice(t.data());
    }
    let mut full = vec![images.len()];
    full.extend(shape);
    Tensor::from_vec(&full, data)
}

/// Inference-mode results over a set of preprocessed images.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<Label>,
    /// Positive-unit output: sigmoid probability or raw SVM margin.
    pub scores: Vec<f64>,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn evaluate<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    inputs: &[Tensor<T>],
    labels: &[Label],
) -> Result<Evaluation> {
    if inputs.len() != labels.len() {
        return Err(Error::shape("evaluate", "label count", inputs.len(), labels.len()));
    }
    let mut outputs = Vec::with_capacity(inputs.len() * 2);
    for x in inputs {
        outputs.extend_from_slice(nn::predict_one(spec, params, x)?.data());
    }
    let outputs = Tensor::from_vec(&[inputs.len(), 2], outputs)?;
    let predictions: Vec<Label> = (0..inputs.len()).map(|i| predicted_label(outputs.row(i))).collect();
    let scores = (0..inputs.len()).map(|i| outputs.row(i)[1].to_f64()).collect();
    let loss = if inputs.is_empty() {
        0.0
    } else {
        head_loss(spec.head, &outputs, labels)?.0.to_f64()
    };
    Ok(Evaluation {
        accuracy: accuracy(&predictions, labels),
        predictions,
        scores,
        loss,
    })
}

fn accuracy(pred: &[Label], actual: &[Label]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(actual).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64
}

/// Stratified train/validation split of `labels` indices.
///
/// Each class with at least two members contributes `round(n * fraction)`
/// validation samples, clamped to `[1, n - 1]`.
pub fn validation_split(labels: &[Label], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let k = if n < 2 {
            0
        } else {
            ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
        };
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Everything produced by training one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub params: ParamSet<f32>,
    pub history: RunHistory,
    pub test: Evaluation,
    /// Indices into the training slice that were fitted on.
    pub fit_indices: Vec<usize>,
    /// Indices into the training slice held out for validation.
    pub validation_indices: Vec<usize>,
}

/// RNG stream identifiers within a fold.
mod stream {
    pub const INIT: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
}

/// Reshuffles `order` and splits it into batches, the last possibly short.
fn epoch_batches<'a, R: Rng>(order: &'a mut [usize], batch_size: usize, rng: &mut R) -> std::slice::Chunks<'a, usize> {
    order.shuffle(rng);
    order.chunks(batch_size)
}

/// Trains one fold from fresh weights and evaluates the test samples.
///
/// The fold's RNG streams derive from `config.seed + fold`. Images are run
/// through the configured Sobel arm and normalized, a stratified validation
/// subset is held out, and each epoch trains on shuffled mini-batches
/// (the last partial batch included).
pub fn train_fold(
    spec: &NetworkSpec,
    config: &TrainConfig,
    train: &[LabeledSample],
    test: &[LabeledSample],
    fold: usize,
) -> Result<FoldOutcome> {
    spec.validate()?;
    config.validate()?;
    require_both_classes(train)?;
    for s in train.iter().chain(test) {
        if s.image.width() != spec.input_side || s.image.height() != spec.input_side {
            return Err(Error::Data(format!(
                "sample {} is {}x{}, network expects {}x{}",
                s.source_id,
                s.image.width(),
                s.image.height(),
                spec.input_side,
                spec.input_side
            )));
        }
    }
    let base = config.seed.wrapping_add(fold as u64);
    let prep = |samples: &[LabeledSample]| -> Result<Vec<Tensor<f32>>> {
        samples.iter().map(|s| to_network_input(&s.image, config.sobel)).collect()
    };
    let train_x = prep(train)?;
    let train_y: Vec<Label> = train.iter().map(|s| s.label).collect();
    let test_x = prep(test)?;
    let test_y: Vec<Label> = test.iter().map(|s| s.label).collect();

    let (fit, val) = validation_split(&train_y, config.validation_fraction, derive_seed(base, stream::SPLIT));
    let val_x: Vec<Tensor<f32>> = val.iter().map(|&i| train_x[i].clone()).collect();
    let val_y: Vec<Label> = val.iter().map(|&i| train_y[i]).collect();

    let mut params: ParamSet<f32> = init_params(spec, derive_seed(base, stream::INIT))?;
    let mut adam = AdamState::for_params(&params);
    let adam_cfg = config.adam();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, stream::SHUFFLE));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, stream::DROPOUT));
    let mut history = RunHistory::default();
    let mut order = fit.clone();

    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in epoch_batches(&mut order, config.batch_size, &mut shuffle_rng) {
            let images: Vec<&Tensor<f32>> = chunk.iter().map(|&i| &train_x[i]).collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| train_y[i]).collect();
            let batch = stack(&images)?;
            let (out, trace) = nn::forward(spec, &params, &batch, true, &mut dropout_rng)?;
            let (loss, mut grad) = head_loss(spec.head, &out, &labels)?;
            let loss = loss as f64;
            if !loss.is_finite() {
                return Err(Error::Diverged { fold, epoch, loss });
            }
            // backward averages over the batch; undo the 1/B already in the loss gradient
            grad.scale(chunk.len() as f32);
            let grads = nn::backward(spec, &params, &trace, &grad)?;
            adam_step(&mut params, &grads, &mut adam, &adam_cfg)?;
            if !params.all_finite() {
                return Err(Error::Diverged { fold, epoch, loss: f64::NAN });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += (0..chunk.len())
                .filter(|&r| predicted_label(out.row(r)) == labels[r])
                .count();
        }
        let n = order.len().max(1) as f64;
        let v = evaluate(spec, &params, &val_x, &val_y)?;
        if !v.loss.is_finite() {
            return Err(Error::Diverged { fold, epoch, loss: v.loss });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss: v.loss,
            val_accuracy: v.accuracy,
        });
    }

    let test_eval = evaluate(spec, &params, &test_x, &test_y)?;
    Ok(FoldOutcome {
        params,
        history,
        test: test_eval,
        fit_indices: fit,
        validation_indices: val,
    })
}
