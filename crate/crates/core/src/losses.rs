//! Training losses. Each returns the scalar loss (mean over all B·L
//! entries) and its gradient with respect to the output logits.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbMatrix;

pub const DEFAULT_EM_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Binary cross-entropy on fully observed labels.
    FullBce,
    /// Assume-negative: unobserved labels treated as absent.
    #[serde(rename = "an")]
    AssumeNegative,
    /// Entropy maximization on unobserved labels.
    #[serde(rename = "em")]
    EntropyMax,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::FullBce => "full-bce",
            LossKind::AssumeNegative => "an",
            LossKind::EntropyMax => "em",
        }
    }

    /// Whether the loss consumes single-positive observations.
    pub fn is_single_positive(self) -> bool {
        !matches!(self, LossKind::FullBce)
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-bce" | "full_bce" | "bce" => Ok(LossKind::FullBce),
            "an" => Ok(LossKind::AssumeNegative),
            "em" => Ok(LossKind::EntropyMax),
            other => Err(Error::Config(format!("unknown loss `{other}` (full-bce, an, em)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    pub em_alpha: f64,
}

impl LossConfig {
    pub fn new(kind: LossKind, em_alpha: f64) -> Result<Self> {
        if !(em_alpha.is_finite() && em_alpha >= 0.0) {
            return Err(Error::Config(format!("em_alpha must be finite and >= 0, got {em_alpha}")));
        }
        Ok(LossConfig { kind, em_alpha })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub dloss_dlogits: Array2<f64>,
}

fn check_labels(probs: &ProbMatrix, labels: ArrayView2<'_, f64>) -> Result<()> {
    if probs.view().dim() != labels.dim() {
        return Err(Error::Dimension(format!(
            "probs {:?} vs labels {:?}",
            probs.view().dim(),
            labels.dim()
        )));
    }
    Ok(())
}

fn check_observed(probs: &ProbMatrix, observed: &[usize]) -> Result<()> {
    if probs.nrows() != observed.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows but {} observed indices",
            probs.nrows(),
            observed.len()
        )));
    }
    let l = probs.ncols();
    if let Some((n, &i)) = observed.iter().enumerate().find(|(_, &i)| i >= l) {
        return Err(Error::Label(format!("row {n}: observed index {i} >= L={l}")));
    }
    Ok(())
}

/// Mean binary cross-entropy. `labels` entries are 0.0 or 1.0.
pub fn bce_full(probs: &ProbMatrix, labels: ArrayView2<'_, f64>) -> Result<LossOutput> {
    check_labels(probs, labels)?;
    let count = (probs.nrows() * probs.ncols()) as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(labels.dim());
    ndarray::Zip::from(&mut grad)
        .and(probs.view())
        .and(labels)
        .for_each(|g, &p, &y| {
            total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            *g = (p - y) / count;
        });
    Ok(LossOutput {
        value: -total / count,
        dloss_dlogits: grad,
    })
}

/// One-hot expansion of single-positive observations: the observed index is
/// 1, everything else 0.
pub fn expand_assume_negative(observed: &[usize], label_count: usize) -> Array2<f64> {
    let mut y = Array2::zeros((observed.len(), label_count));
    for (n, &i) in observed.iter().enumerate() {
        y[[n, i]] = 1.0;
    }
    y
}

/// Assume-negative loss: BCE with every unobserved label set to 0.
pub fn an_loss(probs: &ProbMatrix, observed: &[usize]) -> Result<LossOutput> {
    check_observed(probs, observed)?;
    bce_full(probs, expand_assume_negative(observed, probs.ncols()).view())
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// Entropy-maximization loss: `-log p` on the observed positive, `-alpha·H(p)`
/// on every unobserved entry, averaged over all B·L entries.
pub fn em_loss(probs: &ProbMatrix, observed: &[usize], alpha: f64) -> Result<LossOutput> {
    check_observed(probs, observed)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Config(format!("em_alpha must be finite and >= 0, got {alpha}")));
    }
    let (b, l) = probs.view().dim();
    let count = (b * l) as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros((b, l));
    for (n, (row, mut grow)) in probs.view().rows().into_iter().zip(grad.rows_mut()).enumerate() {
        for (i, (&p, g)) in row.iter().zip(grow.iter_mut()).enumerate() {
            if i == observed[n] {
                total += -p.ln();
                *g = (p - 1.0) / count;
            } else {
                total += -alpha * binary_entropy(p);
                *g = -alpha * p * (1.0 - p) * ((1.0 - p) / p).ln() / count;
            }
        }
    }
    Ok(LossOutput {
        value: total / count,
        dloss_dlogits: grad,
    })
}

/// Training targets, tagged by what the learner is allowed to see.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Full(ArrayView2<'a, f64>),
    Single(&'a [usize]),
}

/// Dispatches on the configured loss, rejecting target kinds it cannot use.
pub fn compute(cfg: &LossConfig, probs: &ProbMatrix, targets: Targets<'_>) -> Result<LossOutput> {
    match (cfg.kind, targets) {
        (LossKind::FullBce, Targets::Full(y)) => bce_full(probs, y),
        (LossKind::AssumeNegative, Targets::Single(z)) => an_loss(probs, z),
        (LossKind::EntropyMax, Targets::Single(z)) => em_loss(probs, z, cfg.em_alpha),
        (kind, _) => Err(Error::Config(format!(
            "loss {kind} needs {} targets",
            if kind.is_single_positive() { "single-positive" } else { "full" }
        ))),
    }
}
