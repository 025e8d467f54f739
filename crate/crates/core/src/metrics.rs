//! Average precision per class and mean average precision.
//!
//! AP is the mean, over positive examples, of precision at that example's
//! rank. Ranking is by descending score with ties broken by ascending
//! example index, so evaluation is deterministic.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub map: f64,
    /// `None` for classes with no positive example.
    pub per_class_ap: Vec<Option<f64>>,
    pub n_classes_evaluated: usize,
}

/// Example indices in rank order.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among equal scores
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// `Ok(None)` when `labels` has no positive.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&v| v > 1) {
        return Err(Error::Label("labels must be 0 or 1".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in rank_order(scores).iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok((hits > 0).then(|| sum / hits as f64))
}

pub fn mean_average_precision(scores: ArrayView2<'_, f64>, labels: &LabelMatrix) -> Result<EvalReport> {
    mean_average_precision_with(scores, labels, Execution::Sequential)
}

/// Per-class APs may run in parallel; the reduction is always in class
/// order.
pub fn mean_average_precision_with(
    scores: ArrayView2<'_, f64>,
    labels: &LabelMatrix,
    exec: Execution,
) -> Result<EvalReport> {
    if scores.dim() != labels.view().dim() {
        return Err(Error::Dimension(format!(
            "scores {:?} vs labels {:?}",
            scores.dim(),
            labels.view().dim()
        )));
    }
    let classes: Vec<usize> = (0..scores.ncols()).collect();
    let per_class_ap = exec.try_map(&classes, |&c| {
        let s = scores.column(c).to_vec();
        let y = labels.view().column(c).to_vec();
        average_precision(&s, &y)
    })?;
    let defined: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Evaluation("no class has a positive example".into()));
    }
    Ok(EvalReport {
        map: defined.iter().sum::<f64>() / defined.len() as f64,
        n_classes_evaluated: defined.len(),
        per_class_ap,
    })
}
