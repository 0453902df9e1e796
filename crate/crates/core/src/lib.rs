//! Binary X-ray image classification: Sobel edge preprocessing, a small CNN
//! trained from scratch with a sigmoid or linear-SVM (hinge) head, data
//! augmentation, stratified k-fold cross-validation and the usual
//! confusion-matrix metrics plus ROC-AUC.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod nn;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use dataset::{Label, LabeledDataset, LabeledSample, Lineage};
pub use error::{Error, ErrorClass, Result};
pub use evaluation::{ConfusionMatrix, CvResult, MetricsReport};
pub use nn::{Head, NetworkSpec, ParamSet};
pub use tensor::{Scalar, Tensor};
pub use training::{LeakageMode, RunHistory, TrainConfig};
