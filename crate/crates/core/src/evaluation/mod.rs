//! Confusion counts, rates, ROC-AUC, fold construction and the cross-validation driver.

mod folds;
mod metrics;
mod roc;

use std::collections::HashSet;

use rayon::prelude::*;

pub use folds::{kfold, stratified_kfold};
pub use metrics::{confusion, metrics, report, ConfusionMatrix, MetricsReport};
pub use roc::roc_auc;

use crate::dataset::{Label, LabeledDataset, LabeledSample, Lineage};
use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, ParamSet};
use crate::training::{train_fold, LeakageMode, RunHistory, TrainConfig};

/// Outcome of one cross-validation fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: MetricsReport,
    pub history: RunHistory,
    pub params: ParamSet<f32>,
    /// Dataset indices of the training samples (fit plus validation).
    pub train_indices: Vec<usize>,
    /// Dataset indices of the test samples, in evaluation order.
    pub test_indices: Vec<usize>,
    pub predictions: Vec<Label>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub folds: Vec<FoldResult>,
    /// Metrics over all test predictions of all folds; AUC over the pooled scores.
    pub pooled: MetricsReport,
}

/// `(train, test)` dataset index sets for every fold.
pub fn fold_assignments(dataset: &LabeledDataset, config: &TrainConfig) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let make = |labels: &[Label]| {
        if config.stratified {
            stratified_kfold(labels, config.folds, config.seed)
        } else {
            kfold(labels.len(), config.folds, config.seed)
        }
    };
    let n = dataset.len();
    match config.leakage_mode {
        LeakageMode::PaperFaithful => {
            let folds = make(&dataset.labels())?;
            Ok(folds
                .into_iter()
                .map(|test| {
                    let in_test: HashSet<usize> = test.iter().copied().collect();
                    ((0..n).filter(|i| !in_test.contains(i)).collect(), test)
                })
                .collect())
        }
        LeakageMode::LeakFree => {
            let originals: Vec<usize> = (0..n)
                .filter(|&i| dataset.samples[i].lineage == Lineage::Original)
                .collect();
            if originals.is_empty() {
                return Err(Error::Data("leak-free mode needs original (non-augmented) samples".into()));
            }
            let labels: Vec<Label> = originals.iter().map(|&i| dataset.samples[i].label).collect();
            let folds = make(&labels)?;
            Ok(folds
                .into_iter()
                .map(|f| {
                    let test: Vec<usize> = f.iter().map(|&j| originals[j]).collect();
                    let held: HashSet<&str> = test.iter().map(|&i| dataset.samples[i].source_id.as_str()).collect();
                    let train = (0..n)
                        .filter(|&i| !held.contains(dataset.samples[i].source_id.as_str()))
                        .collect();
                    (train, test)
                })
                .collect())
        }
    }
}

fn run_fold(
    spec: &NetworkSpec,
    config: &TrainConfig,
    dataset: &LabeledDataset,
    fold: usize,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
) -> Result<FoldResult> {
    let pick = |idx: &[usize]| -> Vec<LabeledSample> { idx.iter().map(|&i| dataset.samples[i].clone()).collect() };
    let train = pick(&train_idx);
    let test = pick(&test_idx);
    let out = train_fold(spec, config, &train, &test, fold)?;
    let actual: Vec<Label> = test.iter().map(|s| s.label).collect();
    let metrics = report(&out.test.predictions, &actual, &out.test.scores, out.test.loss)?;
    Ok(FoldResult {
        fold,
        metrics,
        history: out.history,
        params: out.params,
        train_indices: train_idx,
        test_indices: test_idx,
        predictions: out.test.predictions,
        scores: out.test.scores,
    })
}

/// k-fold cross-validation of `spec` under `config`.
///
/// With `threads > 1` folds train concurrently; each fold is an independent
/// deterministic computation, so results are bit-identical to `threads == 1`.
pub fn cross_validate(
    spec: &NetworkSpec,
    config: &TrainConfig,
    dataset: &LabeledDataset,
    threads: usize,
) -> Result<CvResult> {
    spec.validate()?;
    config.validate()?;
    dataset.require_both_classes()?;
    if dataset.side != spec.input_side {
        return Err(Error::Data(format!(
            "dataset side {} differs from network input side {}",
            dataset.side, spec.input_side
        )));
    }
    let assignments = fold_assignments(dataset, config)?;
    let results: Vec<Result<FoldResult>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            assignments
                .into_par_iter()
                .enumerate()
                .map(|(k, (tr, te))| run_fold(spec, config, dataset, k, tr, te))
                .collect()
        })
    } else {
        assignments
            .into_iter()
            .enumerate()
            .map(|(k, (tr, te))| run_fold(spec, config, dataset, k, tr, te))
            .collect()
    };
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let pooled = pool_folds(&folds, dataset)?;
    Ok(CvResult {
        spec: spec.clone(),
        config: config.clone(),
        folds,
        pooled,
    })
}

/// Pooled report: summed counts, AUC over concatenated scores, sample-weighted mean loss.
pub fn pool_folds(folds: &[FoldResult], dataset: &LabeledDataset) -> Result<MetricsReport> {
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let mut scores = Vec::new();
    let mut loss_sum = 0.0;
    for f in folds {
        predicted.extend_from_slice(&f.predictions);
        actual.extend(f.test_indices.iter().map(|&i| dataset.samples[i].label));
        scores.extend_from_slice(&f.scores);
        loss_sum += f.metrics.loss * f.test_indices.len() as f64;
    }
    let n = actual.len().max(1) as f64;
    report(&predicted, &actual, &scores, loss_sum / n)
}
