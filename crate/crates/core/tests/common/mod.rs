//! Independent oracles shared by the integration tests. Nothing here calls
//! the code paths it is used to check.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use spml::losses::{self, LossConfig, LossKind, Targets};
use spml::model::{MlpModel, Params};

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// A random small network, batch and targets with every hidden
/// pre-activation at least `margin` away from the ReLU kink, so central
/// differences with step 1e-5 never straddle it.
pub struct GradInstance {
    pub model: MlpModel,
    pub x: Array2<f64>,
    pub full: Array2<f64>,
    pub observed: Vec<usize>,
}

pub fn grad_instance(seed: u64, d: usize, h: usize, l: usize, b: usize) -> GradInstance {
    let mut r = rng(seed);
    loop {
        let mut g = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_simple_fn((rows, cols), || scale * r.sample::<f64, _>(StandardNormal))
        };
        let params = Params {
            w1: g(d, h, 0.5),
            b1: Array1::from_vec(g(1, h, 0.2).into_raw_vec_and_offset().0),
            w2: g(h, l, 0.5),
            b2: Array1::from_vec(g(1, l, 0.2).into_raw_vec_and_offset().0),
        };
        let x = g(b, d, 1.0);
        let pre = x.dot(&params.w1) + &params.b1;
        if pre.iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        let model = MlpModel::from_params(params).unwrap();
        let full = Array2::from_shape_simple_fn((b, l), || f64::from(u8::from(r.random_bool(0.4))));
        let observed = (0..b).map(|_| r.random_range(0..l)).collect();
        return GradInstance { model, x, full, observed };
    }
}

impl GradInstance {
    pub fn targets(&self, kind: LossKind) -> Targets<'_> {
        match kind {
            LossKind::FullBce => Targets::Full(self.full.view()),
            _ => Targets::Single(&self.observed),
        }
    }

    pub fn loss_value(&self, model: &MlpModel, kind: LossKind, alpha: f64) -> f64 {
        let probs = model.predict(self.x.view()).unwrap();
        let cfg = LossConfig::new(kind, alpha).unwrap();
        losses::compute(&cfg, &probs, self.targets(kind)).unwrap().value
    }

    pub fn analytic(&self, kind: LossKind, alpha: f64) -> Params {
        let pass = self.model.forward(self.x.view()).unwrap();
        let cfg = LossConfig::new(kind, alpha).unwrap();
        let out = losses::compute(&cfg, &pass.probs, self.targets(kind)).unwrap();
        self.model.backward(self.x.view(), &pass, out.dloss_dlogits.view()).unwrap()
    }

    /// Central finite differences of the end-to-end loss w.r.t. every
    /// parameter.
    pub fn numeric(&self, kind: LossKind, alpha: f64, step: f64) -> Params {
        let mut grads = Params::zeros_like(&self.model.params);
        let base = self.model.params.clone();
        for t in 0..4 {
            for i in 0..base.slices()[t].len() {
                let mut plus = base.clone();
                plus.slices_mut()[t][i] += step;
                let mut minus = base.clone();
                minus.slices_mut()[t][i] -= step;
                let fp = self.loss_value(&MlpModel::from_params(plus).unwrap(), kind, alpha);
                let fm = self.loss_value(&MlpModel::from_params(minus).unwrap(), kind, alpha);
                grads.slices_mut()[t][i] = (fp - fm) / (2.0 * step);
            }
        }
        grads
    }
}

/// `||a - n|| / max(||a||, ||n||)` for each parameter tensor; the largest of
/// the four.
pub fn max_tensor_rel_error(a: &Params, n: &Params) -> f64 {
    a.slices()
        .iter()
        .zip(n.slices())
        .map(|(x, y)| {
            let diff: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let denom = nx.max(ny);
            if denom == 0.0 {
                diff
            } else {
                diff / denom
            }
        })
        .fold(0.0, f64::max)
}

/// O(N²) AP: for each positive i, precision = positives ranked at or
/// above i / everything ranked at or above i, where j ranks at or above i
/// iff s_j > s_i, or s_j == s_i and j <= i.
pub fn brute_force_ap(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let at_or_above = |j: usize, i: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
    let mut precisions = Vec::new();
    for i in (0..n).filter(|&i| labels[i] == 1) {
        let mut hits = 0usize;
        let mut total = 0usize;
        for j in 0..n {
            if at_or_above(j, i) {
                total += 1;
                if labels[j] == 1 {
                    hits += 1;
                }
            }
        }
        precisions.push(hits as f64 / total as f64);
    }
    if precisions.is_empty() {
        None
    } else {
        Some(precisions.iter().sum::<f64>() / precisions.len() as f64)
    }
}

/// Per-class brute-force APs and their mean over defined classes.
pub fn brute_force_map(scores: &Array2<f64>, labels: &Array2<u8>) -> (Vec<Option<f64>>, Option<f64>) {
    let per: Vec<Option<f64>> = (0..scores.ncols())
        .map(|c| brute_force_ap(&scores.column(c).to_vec(), &labels.column(c).to_vec()))
        .collect();
    let defined: Vec<f64> = per.iter().flatten().copied().collect();
    let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    (per, map)
}

/// Random scores and labels; half the instances draw scores from a coarse
/// grid so ties are common.
pub fn random_map_instance(seed: u64) -> (Array2<f64>, Array2<u8>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=50);
    let l = r.random_range(1..=8);
    let coarse = seed.is_multiple_of(2);
    let scores = Array2::from_shape_simple_fn((n, l), || {
        if coarse {
            f64::from(r.random_range(0..5u8)) / 4.0
        } else {
            r.random::<f64>()
        }
    });
    let rate = r.random_range(0.05..0.6);
    let labels = Array2::from_shape_simple_fn((n, l), || u8::from(r.random_bool(rate)));
    (scores, labels)
}
