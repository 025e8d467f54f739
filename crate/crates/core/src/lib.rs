//! Single-positive multi-label (SPML) learning with pseudo multi-labels.
//!
//! A teacher network is trained on data where each example reveals only one
//! present category. Its thresholded predictions on the training set become
//! hard multi-labels, which then supervise a student network as if the data
//! were fully labeled. The crate also carries the two standard baselines
//! (assume-negative and entropy-maximization losses), a full-supervision
//! skyline, mean-average-precision evaluation and a sweep harness over the
//! threshold.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`model`]: one-hidden-layer MLP with analytic gradients and Adam.
//! - [`data`]: synthetic generator, splits, single-positive corruption, file I/O.
//! - [`losses`]: full BCE, assume-negative, entropy-maximization.
//! - [`pseudo`]: thresholding teacher probabilities into pseudo multi-labels.
//! - [`metrics`]: per-class AP and MAP.
//! - [`pipeline`]: teacher/student training and the threshold sweep.
//! - [`report`]: results CSV, SVG charts and run manifests.
//! - [`cli`]: the `spml` command-line tool.

pub mod cli;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod pseudo;
pub mod report;
pub mod seed;

pub use error::{Error, Result};
