use crate::dataset::Label;
use crate::error::{Error, Result};

/// Area under the ROC curve by the trapezoidal rule over the tie-aware curve.
///
/// Scores are grouped by distinct value from highest to lowest; each group adds
/// one ROC vertex. The area is accumulated in integer count units, so the
/// result equals the Mann-Whitney pair statistic (ties counted as 1/2) exactly
/// up to the final division.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc_auc", "score count", labels.len(), scores.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("roc_auc: NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == Label::Positive).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("roc_auc needs at least one positive and one negative".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // twice the area in units of (1/pos) x (1/neg)
    let mut area2: u128 = 0;
    let mut tp: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dtp, mut dfp) = (0u128, 0u128);
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Positive => dtp += 1,
                Label::Negative => dfp += 1,
            }
            i += 1;
        }
        // trapezoid between (fp, tp) and (fp + dfp, tp + dtp)
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
    }
    Ok(area2 as f64 / (2 * pos * neg) as f64)
}
