//! Pseudo multi-labels: hard labels minted from teacher probabilities.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::model::ProbMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelConfig {
    pub tau: f64,
    /// Force the observed positive of each example on, whatever the teacher
    /// predicted for it.
    #[serde(default)]
    pub keep_observed_positive: bool,
}

impl PseudoLabelConfig {
    pub fn new(tau: f64, keep_observed_positive: bool) -> Result<Self> {
        let cfg = PseudoLabelConfig {
            tau,
            keep_observed_positive,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must be in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// Teacher-generated labels. Distinct from ground truth so a student can
/// only ever be handed this type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabelMatrix(LabelMatrix);

impl PseudoLabelMatrix {
    pub fn labels(&self) -> &LabelMatrix {
        &self.0
    }

    pub fn into_labels(self) -> LabelMatrix {
        self.0
    }

    pub fn view(&self) -> ArrayView2<'_, u8> {
        self.0.view()
    }
}

/// `1` iff the probability is strictly above `tau`; a probability equal to
/// `tau` maps to `0`.
pub fn threshold(probs: ArrayView2<'_, f64>, tau: f64) -> Array2<u8> {
    probs.mapv(|p| u8::from(p > tau))
}

pub fn make_pseudo_labels(
    probs: &ProbMatrix,
    cfg: &PseudoLabelConfig,
    observed: Option<&[usize]>,
) -> Result<PseudoLabelMatrix> {
    cfg.validate()?;
    let mut y = threshold(probs.view(), cfg.tau);
    if cfg.keep_observed_positive {
        let obs = observed.ok_or_else(|| {
            Error::Config("keep_observed_positive requires the observed positives".into())
        })?;
        if obs.len() != y.nrows() {
            return Err(Error::Dimension(format!(
                "{} probability rows but {} observed indices",
                y.nrows(),
                obs.len()
            )));
        }
        for (n, &i) in obs.iter().enumerate() {
            if i >= y.ncols() {
                return Err(Error::Label(format!("row {n}: observed index {i} >= L={}", y.ncols())));
            }
            y[[n, i]] = 1;
        }
    }
    Ok(PseudoLabelMatrix(LabelMatrix::new(y)?))
}

/// Total positive entries divided by the number of rows.
pub fn avg_positives_per_example(labels: &LabelMatrix) -> Result<f64> {
    if labels.nrows() == 0 {
        return Err(Error::Input("cannot average over an empty label matrix".into()));
    }
    Ok(labels.positives() as f64 / labels.nrows() as f64)
}
