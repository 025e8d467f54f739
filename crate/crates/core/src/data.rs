//! Multi-label datasets: the synthetic generator, train/val/test splits,
//! single-positive corruption and the line-oriented dataset file format.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Attempts allowed per row to draw at least one positive label.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

/// N×D real features, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite feature at row {}",
                pos / values.ncols().max(1)
            )));
        }
        Ok(FeatureMatrix(values))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix(self.0.select(Axis(0), idx))
    }
}

/// N×L binary label matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix(Array2<u8>);

/// Fully-observed ground truth.
pub type FullLabelMatrix = LabelMatrix;

impl LabelMatrix {
    pub fn new(values: Array2<u8>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::Label(format!(
                "label value {} outside {{0,1}} at row {}",
                values.iter().nth(pos).copied().unwrap_or_default(),
                pos / values.ncols().max(1)
            )));
        }
        Ok(LabelMatrix(values))
    }

    pub fn view(&self) -> ArrayView2<'_, u8> {
        self.0.view()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, n: usize) -> ArrayView1<'_, u8> {
        self.0.row(n)
    }

    pub fn positives(&self) -> usize {
        self.0.iter().map(|&v| usize::from(v)).sum()
    }

    pub fn select_rows(&self, idx: &[usize]) -> LabelMatrix {
        LabelMatrix(self.0.select(Axis(0), idx))
    }

    /// Labels as `f64` for loss computation.
    pub fn to_f64(&self) -> Array2<f64> {
        self.0.mapv(f64::from)
    }
}

/// Features plus one observed positive per example. Every other category
/// of an example is unobserved; nothing here records a confirmed negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePositiveDataset {
    pub features: FeatureMatrix,
    pub observed_positive: Vec<usize>,
    pub label_count: usize,
}

impl SinglePositiveDataset {
    pub fn new(features: FeatureMatrix, observed_positive: Vec<usize>, label_count: usize) -> Result<Self> {
        if features.nrows() != observed_positive.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} observed positives",
                features.nrows(),
                observed_positive.len()
            )));
        }
        if label_count == 0 {
            return Err(Error::Dimension("label count must be >= 1".into()));
        }
        if let Some((n, &i)) = observed_positive.iter().enumerate().find(|(_, &i)| i >= label_count) {
            return Err(Error::Label(format!(
                "row {n}: observed positive {i} out of range for L={label_count}"
            )));
        }
        Ok(SinglePositiveDataset {
            features,
            observed_positive,
            label_count,
        })
    }

    pub fn len(&self) -> usize {
        self.observed_positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed_positive.is_empty()
    }
}

/// One partition of a split: the selected source rows and their data.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub indices: Vec<usize>,
    pub features: FeatureMatrix,
    pub labels: FullLabelMatrix,
}

/// Disjoint train/val/test partitions. Val and test keep full labels; only
/// `train` is meant to go through [`corrupt_to_single_positive`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Partition,
    pub val: Partition,
    pub test: Partition,
    pub fractions: SplitFractions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Split(format!("fractions must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub target_positive_rate: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// 2500 rows split 2000/250/250 by the default fractions.
    fn default() -> Self {
        SynthConfig {
            n: 2500,
            d: 20,
            l: 10,
            target_positive_rate: 0.3,
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.l == 0 {
            return Err(Error::Config(format!(
                "N, D, L must be >= 1, got N={} D={} L={}",
                self.n, self.d, self.l
            )));
        }
        let r = self.target_positive_rate;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!("target positive rate must be in (0,1), got {r}")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Linear-interpolated empirical quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Draws a learnable multi-label dataset: standard-normal features, one
/// random unit direction per class, and a per-class threshold at the
/// `1 - target_positive_rate` quantile of the projections. Rows that end up
/// with no positive are redrawn.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(FeatureMatrix, FullLabelMatrix)> {
    cfg.validate()?;
    let SynthConfig { n, d, l, .. } = *cfg;
    let mut rng = seed::rng(cfg.seed);

    let mut weights = Array2::<f64>::zeros((d, l));
    for mut col in weights.columns_mut() {
        loop {
            col.mapv_inplace(|_| rng.sample(StandardNormal));
            let norm = col.dot(&col).sqrt();
            if norm > 1e-12 {
                col /= norm;
                break;
            }
        }
    }

    let mut x = Array2::<f64>::from_shape_simple_fn((n, d), || rng.sample(StandardNormal));
    let proj = x.dot(&weights);
    let thresholds: Vec<f64> = proj
        .columns()
        .into_iter()
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 1.0 - cfg.target_positive_rate)
        })
        .collect();

    let mut y = Array2::<u8>::zeros((n, l));
    for row in 0..n {
        let mut attempts = 0;
        loop {
            let xr = x.row(row);
            let mut any = false;
            for c in 0..l {
                let noise: f64 = if cfg.noise_std > 0.0 {
                    cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let on = xr.dot(&weights.column(c)) + noise > thresholds[c];
                y[[row, c]] = u8::from(on);
                any |= on;
            }
            if any {
                break;
            }
            attempts += 1;
            if attempts >= MAX_RESAMPLE_ATTEMPTS {
                return Err(Error::Generation(format!(
                    "row {row}: no positive label after {MAX_RESAMPLE_ATTEMPTS} resamples"
                )));
            }
            for v in x.row_mut(row) {
                *v = rng.sample(StandardNormal);
            }
        }
    }
    Ok((FeatureMatrix(x), LabelMatrix(y)))
}

/// Keeps one positive per row, chosen uniformly among that row's positives.
pub fn corrupt_to_single_positive(
    labels: &FullLabelMatrix,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<SinglePositiveDataset> {
    if labels.nrows() != features.nrows() {
        return Err(Error::Dimension(format!(
            "{} label rows but {} feature rows",
            labels.nrows(),
            features.nrows()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut observed = Vec::with_capacity(labels.nrows());
    let mut candidates = Vec::with_capacity(labels.ncols());
    for (n, row) in labels.view().rows().into_iter().enumerate() {
        candidates.clear();
        candidates.extend(row.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i));
        if candidates.is_empty() {
            return Err(Error::Corruption { row: n });
        }
        observed.push(candidates[rng.random_range(0..candidates.len())]);
    }
    SinglePositiveDataset::new(features.clone(), observed, labels.ncols())
}

/// Seeded shuffle, then contiguous train/val/test partition.
pub fn split_dataset(
    features: &FeatureMatrix,
    labels: &FullLabelMatrix,
    fractions: SplitFractions,
    seed: u64,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    let n = features.nrows();
    if labels.nrows() != n {
        return Err(Error::Dimension(format!("{} label rows but {n} feature rows", labels.nrows())));
    }
    let n_train = (fractions.train * n as f64).round() as usize;
    let n_val = (fractions.val * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Split(format!(
            "fractions {:?} leave an empty partition for N={n}",
            [fractions.train, fractions.val, fractions.test]
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let part = |idx: &[usize]| Partition {
        indices: idx.to_vec(),
        features: features.select_rows(idx),
        labels: labels.select_rows(idx),
    };
    Ok(DatasetSplit {
        train: part(&order[..n_train]),
        val: part(&order[n_train..n_train + n_val]),
        test: part(&order[n_train + n_val..]),
        fractions,
    })
}

/// Contents of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetFile {
    Full {
        features: FeatureMatrix,
        labels: FullLabelMatrix,
    },
    Single(SinglePositiveDataset),
}

impl DatasetFile {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetFile::Full { .. } => "full",
            DatasetFile::Single(_) => "single",
        }
    }

    pub fn features(&self) -> &FeatureMatrix {
        match self {
            DatasetFile::Full { features, .. } => features,
            DatasetFile::Single(s) => &s.features,
        }
    }

    pub fn label_count(&self) -> usize {
        match self {
            DatasetFile::Full { labels, .. } => labels.ncols(),
            DatasetFile::Single(s) => s.label_count,
        }
    }
}

/// Renders the dataset file format:
///
/// ```text
/// spml-dataset v1 N=<n> D=<d> L=<l> kind=<full|single>
/// <f1>,...,<fD>|<y1>,...,<yL>      (kind=full)
/// <f1>,...,<fD>|<index>            (kind=single)
/// ```
///
/// Features are written with 17 significant digits, which round-trips f64.
pub fn format_dataset(data: &DatasetFile) -> String {
    let x = data.features();
    let (n, d, l) = (x.nrows(), x.ncols(), data.label_count());
    let mut out = format!("spml-dataset v1 N={n} D={d} L={l} kind={}\n", data.kind());
    for r in 0..n {
        for (j, v) in x.view().row(r).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('|');
        match data {
            DatasetFile::Full { labels, .. } => {
                for (j, v) in labels.row(r).iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    out.push(if *v == 1 { '1' } else { '0' });
                }
            }
            DatasetFile::Single(s) => {
                let _ = write!(out, "{}", s.observed_positive[r]);
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, data: &DatasetFile) -> Result<()> {
    std::fs::write(path, format_dataset(data)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

struct Header {
    n: usize,
    d: usize,
    l: usize,
    full: bool,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("spml-dataset") {
        return Err("expected header starting with `spml-dataset`".into());
    }
    if parts.next() != Some("v1") {
        return Err("unsupported format version (expected v1)".into());
    }
    let mut field = |key: &str| -> std::result::Result<String, String> {
        let tok = parts.next().ok_or_else(|| format!("missing {key}= in header"))?;
        tok.strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| format!("expected {key}=..., found `{tok}`"))
    };
    let num = |key: &str, v: String| -> std::result::Result<usize, String> {
        v.parse::<usize>()
            .ok()
            .filter(|&x| x >= 1)
            .ok_or_else(|| format!("{key} must be a positive integer, got `{v}`"))
    };
    let n = num("N", field("N")?)?;
    let d = num("D", field("D")?)?;
    let l = num("L", field("L")?)?;
    let full = match field("kind")?.as_str() {
        "full" => true,
        "single" => false,
        other => return Err(format!("kind must be full or single, got `{other}`")),
    };
    if let Some(extra) = parts.next() {
        return Err(format!("unexpected header token `{extra}`"));
    }
    Ok(Header { n, d, l, full })
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<DatasetFile> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, s)| (i + 1, s.trim()))
        .filter(|(_, s)| !s.is_empty() && !s.starts_with('#'));

    let (hline, htext) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let h = parse_header(htext).map_err(|m| err(hline, m))?;

    let mut x = Array2::<f64>::zeros((h.n, h.d));
    let mut y = Array2::<u8>::zeros((if h.full { h.n } else { 0 }, h.l));
    let mut observed = Vec::with_capacity(if h.full { 0 } else { h.n });
    let mut count = 0;
    for (lineno, s) in lines {
        if count == h.n {
            return Err(err(lineno, format!("more than N={} data lines", h.n)));
        }
        let (feat, lab) = s
            .split_once('|')
            .ok_or_else(|| err(lineno, "missing `|` separator".into()))?;
        let feats: Vec<&str> = feat.split(',').collect();
        if feats.len() != h.d {
            return Err(err(lineno, format!("expected D={} features, found {}", h.d, feats.len())));
        }
        for (j, tok) in feats.iter().enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad feature value `{}`", tok.trim())))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite feature value `{}`", tok.trim())));
            }
            x[[count, j]] = v;
        }
        if h.full {
            let labs: Vec<&str> = lab.split(',').collect();
            if labs.len() != h.l {
                return Err(err(lineno, format!("expected L={} labels, found {}", h.l, labs.len())));
            }
            for (j, tok) in labs.iter().enumerate() {
                y[[count, j]] = match tok.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(err(lineno, format!("label value `{other}` not in {{0,1}}"))),
                };
            }
        } else {
            let idx: usize = lab
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad observed index `{}`", lab.trim())))?;
            if idx >= h.l {
                return Err(err(lineno, format!("observed index {idx} out of range for L={}", h.l)));
            }
            observed.push(idx);
        }
        count += 1;
    }
    if count != h.n {
        return Err(err(hline, format!("header declares N={} but found {count} data lines", h.n)));
    }
    let features = FeatureMatrix(x);
    Ok(if h.full {
        DatasetFile::Full {
            features,
            labels: LabelMatrix(y),
        }
    } else {
        DatasetFile::Single(SinglePositiveDataset {
            features,
            observed_positive: observed,
            label_count: h.l,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn cfg(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n,
            d: 6,
            l: 4,
            target_positive_rate: 0.3,
            noise_std: 0.1,
            seed,
        }
    }

    #[test]
    fn generator_contract() {
        let (x, y) = generate_synthetic(&cfg(100, 3)).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (100, 6));
        assert_eq!((y.nrows(), y.ncols()), (100, 4));
        assert!(y.view().rows().into_iter().all(|r| r.iter().any(|&v| v == 1)));
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_synthetic(&cfg(50, 9)).unwrap(), generate_synthetic(&cfg(50, 9)).unwrap());
        assert_ne!(generate_synthetic(&cfg(50, 9)).unwrap(), generate_synthetic(&cfg(50, 10)).unwrap());
    }

    #[test]
    fn generator_hits_target_rate() {
        let c = SynthConfig {
            n: 5000,
            d: 20,
            l: 10,
            target_positive_rate: 0.3,
            noise_std: 0.0,
            seed: 4,
        };
        let (_, y) = generate_synthetic(&c).unwrap();
        let mean = y.positives() as f64 / 5000.0;
        assert!((2.5..=3.5).contains(&mean), "mean positives {mean}");
    }

    #[test]
    fn generator_rejects_bad_config() {
        let mut c = cfg(10, 0);
        c.target_positive_rate = 1.5;
        assert!(matches!(generate_synthetic(&c), Err(Error::Config(_))));
        c.target_positive_rate = 0.3;
        c.l = 0;
        assert!(matches!(generate_synthetic(&c), Err(Error::Config(_))));
    }

    #[test]
    fn corruption_single_choice_is_certain() {
        let y = LabelMatrix::new(array![[1, 0, 0]]).unwrap();
        let x = FeatureMatrix::new(array![[0.5]]).unwrap();
        for s in 0..20 {
            assert_eq!(corrupt_to_single_positive(&y, &x, s).unwrap().observed_positive, vec![0]);
        }
    }

    #[test]
    fn corruption_two_way_split_is_balanced() {
        let y = LabelMatrix::new(array![[0, 1, 1]]).unwrap();
        let x = FeatureMatrix::new(array![[0.0]]).unwrap();
        let ones = (0..10_000u64)
            .filter(|&s| corrupt_to_single_positive(&y, &x, s).unwrap().observed_positive[0] == 1)
            .count();
        let frac = ones as f64 / 10_000.0;
        assert!((frac - 0.5).abs() <= 0.02, "frac {frac}");
    }

    #[test]
    fn corruption_names_empty_row() {
        let y = LabelMatrix::new(array![[1, 0], [0, 0]]).unwrap();
        let x = FeatureMatrix::new(array![[0.0], [1.0]]).unwrap();
        assert!(matches!(
            corrupt_to_single_positive(&y, &x, 0),
            Err(Error::Corruption { row: 1 })
        ));
    }

    #[test]
    fn split_sizes_and_partition() {
        let (x, y) = generate_synthetic(&cfg(100, 1)).unwrap();
        let s = split_dataset(&x, &y, SplitFractions::default(), 5).unwrap();
        assert_eq!(
            (s.train.indices.len(), s.val.indices.len(), s.test.indices.len()),
            (80, 10, 10)
        );
        let mut all: Vec<usize> = [&s.train, &s.val, &s.test]
            .iter()
            .flat_map(|p| p.indices.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split_dataset(&x, &y, SplitFractions::default(), 5).unwrap());
        // partitions carry the source rows
        let i = s.test.indices[3];
        assert_eq!(s.test.labels.row(3), y.row(i));
    }

    #[test]
    fn split_rejects_empty_partition() {
        let (x, y) = generate_synthetic(&cfg(5, 1)).unwrap();
        let f = SplitFractions {
            train: 0.9,
            val: 0.05,
            test: 0.05,
        };
        assert!(matches!(split_dataset(&x, &y, f, 0), Err(Error::Split(_))));
        let bad = SplitFractions {
            train: 0.5,
            val: 0.5,
            test: 0.5,
        };
        assert!(matches!(split_dataset(&x, &y, bad, 0), Err(Error::Split(_))));
    }

    #[test]
    fn file_roundtrip_of_generated_data() {
        let (x, y) = generate_synthetic(&cfg(40, 2)).unwrap();
        let full = DatasetFile::Full {
            features: x.clone(),
            labels: y.clone(),
        };
        let text = format_dataset(&full);
        assert!(text.starts_with("spml-dataset v1 N=40 D=6 L=4 kind=full\n"));
        assert_eq!(parse_dataset(&text, Path::new("mem")).unwrap(), full);

        let single = DatasetFile::Single(corrupt_to_single_positive(&y, &x, 3).unwrap());
        let text = format_dataset(&single);
        assert_eq!(parse_dataset(&text, Path::new("mem")).unwrap(), single);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "# comment\nspml-dataset v1 N=2 D=1 L=5 kind=full\n0.5|1,0,0,0,0\n0.25|1,0,0,1\n";
        match parse_dataset(text, Path::new("f")) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("L=5"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "spml-dataset v1 N=1 D=1 L=5 kind=single\n0.5|7\n";
        assert!(matches!(parse_dataset(text, Path::new("f")), Err(Error::Parse { line: 2, .. })));
        let text = "spml-dataset v1 N=1 D=1 L=2 kind=full\n0.5|2,0\n";
        assert!(matches!(parse_dataset(text, Path::new("f")), Err(Error::Parse { line: 2, .. })));
        let text = "spml-dataset v2 N=1 D=1 L=2 kind=full\n";
        assert!(matches!(parse_dataset(text, Path::new("f")), Err(Error::Parse { line: 1, .. })));
        let text = "spml-dataset v1 N=2 D=1 L=2 kind=full\n0.5|1,0\n";
        assert!(matches!(parse_dataset(text, Path::new("f")), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn feature_text_roundtrip_is_exact(vals in proptest::collection::vec(-1e300f64..1e300, 1..30)) {
            let n = vals.len();
            let x = FeatureMatrix::new(Array2::from_shape_vec((n, 1), vals).unwrap()).unwrap();
            let y = LabelMatrix::new(Array2::ones((n, 1))).unwrap();
            let f = DatasetFile::Full { features: x, labels: y };
            let back = parse_dataset(&format_dataset(&f), Path::new("p")).unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn corruption_picks_true_positives(seed in any::<u64>()) {
            let (x, y) = generate_synthetic(&cfg(30, seed)).unwrap();
            let s = corrupt_to_single_positive(&y, &x, seed ^ 1).unwrap();
            for (n, &i) in s.observed_positive.iter().enumerate() {
                prop_assert_eq!(y.view()[[n, i]], 1);
            }
            prop_assert_eq!(&s.features, &x);
        }
    }
}
