use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Tallies predictions against labels, with COVID-19 as the positive class.
pub fn confusion(predicted: &[Label], actual: &[Label]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::shape("confusion", "prediction count", actual.len(), predicted.len()));
    }
    if predicted.is_empty() {
        return Err(Error::Data("confusion: no samples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (Label::Positive, Label::Positive) => cm.tp += 1,
            (Label::Negative, Label::Negative) => cm.tn += 1,
            (Label::Positive, Label::Negative) => cm.fp += 1,
            (Label::Negative, Label::Positive) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub precision: f64,
    pub f1: f64,
    pub specificity: f64,
    pub auc: f64,
    pub loss: f64,
    /// Names of metrics whose denominator was zero (reported as 0).
    pub degenerate: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if den == 0 {
        degenerate.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, sensitivity, precision, F1 and specificity from counts.
/// `auc` and `loss` are left at 0 for the caller to fill in.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let mut degenerate = Vec::new();
    let ConfusionMatrix { tp, tn, fp, fn_ } = *cm;
    MetricsReport {
        confusion: *cm,
        accuracy: ratio(tp + tn, tp + tn + fp + fn_, "accuracy", &mut degenerate),
        sensitivity: ratio(tp, tp + fn_, "sensitivity", &mut degenerate),
        precision: ratio(tp, tp + fp, "precision", &mut degenerate),
        f1: ratio(2 * tp, 2 * tp + fp + fn_, "f1", &mut degenerate),
        specificity: ratio(tn, tn + fp, "specificity", &mut degenerate),
        auc: 0.0,
        loss: 0.0,
        degenerate,
    }
}

/// Full report for one evaluated set: counts, rates, ROC-AUC over `scores` and the mean loss.
pub fn report(predicted: &[Label], actual: &[Label], scores: &[f64], loss: f64) -> Result<MetricsReport> {
    let mut r = metrics(&confusion(predicted, actual)?);
    match super::roc_auc(scores, actual) {
        Ok(auc) => r.auc = auc,
        Err(Error::Data(_)) => r.degenerate.push("auc".into()),
        Err(e) => return Err(e),
    }
    r.loss = loss;
    Ok(r)
}
