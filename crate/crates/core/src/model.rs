//! One-hidden-layer multi-label classifier with analytic gradients.
//!
//! `probs = sigmoid(relu(x·w1 + b1)·w2 + b2)`, clamped to `[EPS, 1 - EPS]`.
//! The same type serves as teacher and student.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Probability clamp applied at the model output.
pub const EPS: f64 = 1e-7;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// N×L predicted probabilities, every entry in `[EPS, 1 - EPS]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Array2<f64>);

impl ProbMatrix {
    /// Wraps raw probabilities, clamping into `[EPS, 1 - EPS]`.
    pub fn from_raw(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::Input("probabilities must be finite and in [0, 1]".into()));
        }
        Ok(ProbMatrix(values.mapv(clamp_prob)))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

/// The parameter set of an [`MlpModel`]. Gradients and Adam moments share
/// this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// D×H
    pub w1: Array2<f64>,
    /// H
    pub b1: Array1<f64>,
    /// H×L
    pub w2: Array2<f64>,
    /// L
    pub b2: Array1<f64>,
}

impl Params {
    pub fn zeros(d: usize, h: usize, l: usize) -> Self {
        Params {
            w1: Array2::zeros((d, h)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((h, l)),
            b2: Array1::zeros(l),
        }
    }

    pub fn zeros_like(other: &Params) -> Self {
        let (d, h, l) = other.dims();
        Params::zeros(d, h, l)
    }

    /// (D, H, L)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols())
    }

    fn check_consistent(&self) -> Result<()> {
        let (_, h, l) = self.dims();
        if self.b1.len() != h || self.w2.nrows() != h || self.b2.len() != l {
            return Err(Error::Dimension(format!(
                "inconsistent parameter shapes: w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                self.w1.dim(),
                self.b1.len(),
                self.w2.dim(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    fn same_shape(&self, other: &Params) -> bool {
        self.w1.dim() == other.w1.dim()
            && self.b1.dim() == other.b1.dim()
            && self.w2.dim() == other.w2.dim()
            && self.b2.dim() == other.b2.dim()
    }

    /// Parameter arrays in checkpoint order, each row-major.
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Flat copy in checkpoint order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub params: Params,
}

/// Output of [`MlpModel::forward`] plus the intermediates backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// B×H pre-activations `x·w1 + b1`.
    pub hidden_pre: Array2<f64>,
    /// B×H `relu(hidden_pre)`.
    pub hidden: Array2<f64>,
    /// B×L clamped sigmoid outputs.
    pub probs: ProbMatrix,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(d: usize, h: usize, l: usize, seed: u64) -> Result<Self> {
        if d == 0 || h == 0 || l == 0 {
            return Err(Error::Dimension(format!(
                "model dimensions must be >= 1, got D={d} H={h} L={l}"
            )));
        }
        let mut rng = seed::rng(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
        };
        let w1 = glorot(d, h);
        let w2 = glorot(h, l);
        Ok(MlpModel {
            params: Params {
                w1,
                b1: Array1::zeros(h),
                w2,
                b2: Array1::zeros(l),
            },
        })
    }

    pub fn from_params(params: Params) -> Result<Self> {
        params.check_consistent()?;
        if !params.all_finite() {
            return Err(Error::Input("model parameters must be finite".into()));
        }
        Ok(MlpModel { params })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.params.dims()
    }

    pub fn input_dim(&self) -> usize {
        self.dims().0
    }

    pub fn label_count(&self) -> usize {
        self.dims().2
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} columns, model expects D={}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let p = &self.params;
        let hidden_pre = x.dot(&p.w1) + &p.b1;
        let hidden = hidden_pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&p.w2) + &p.b2;
        let probs = ProbMatrix(logits.mapv(|z| clamp_prob(sigmoid(z))));
        Ok(ForwardPass {
            hidden_pre,
            hidden,
            probs,
        })
    }

    /// Probabilities only.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<ProbMatrix> {
        Ok(self.forward(x)?.probs)
    }

    /// Parameter gradients given the loss gradient at the output logits.
    /// `pass` must come from `forward` on the same `x`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        pass: &ForwardPass,
        dloss_dlogits: ArrayView2<'_, f64>,
    ) -> Result<Params> {
        let (d, h, l) = self.dims();
        let b = x.nrows();
        if x.ncols() != d
            || pass.hidden_pre.dim() != (b, h)
            || pass.hidden.dim() != (b, h)
            || dloss_dlogits.dim() != (b, l)
        {
            return Err(Error::Dimension(format!(
                "backward shapes disagree: x {:?}, hidden {:?}, dlogits {:?} for D={d} H={h} L={l}",
                x.dim(),
                pass.hidden_pre.dim(),
                dloss_dlogits.dim()
            )));
        }
        let w2 = dloss_dlogits.t().dot(&pass.hidden).reversed_axes();
        let b2 = dloss_dlogits.sum_axis(Axis(0));
        let mut dhidden = dloss_dlogits.dot(&self.params.w2.t());
        // relu'(0) := 0
        ndarray::Zip::from(&mut dhidden)
            .and(&pass.hidden_pre)
            .for_each(|g, &pre| {
                if pre <= 0.0 {
                    *g = 0.0;
                }
            });
        let w1 = x.t().dot(&dhidden);
        let b1 = dhidden.sum_axis(Axis(0));
        Ok(Params {
            w1: w1.as_standard_layout().into_owned(),
            b1,
            w2: w2.as_standard_layout().into_owned(),
            b2,
        })
    }

    /// Writes the binary checkpoint (see [`read_checkpoint`]).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        write_checkpoint(self, &mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        read_checkpoint(&mut bytes.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Params,
    pub second_moment: Params,
    pub step: u64,
    pub learning_rate: f64,
}

impl OptimizerState {
    pub fn new(model: &MlpModel, learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            first_moment: Params::zeros_like(&model.params),
            second_moment: Params::zeros_like(&model.params),
            step: 0,
            learning_rate,
        })
    }
}

/// One bias-corrected Adam update, in place.
pub fn optimizer_step(model: &mut MlpModel, grads: &Params, state: &mut OptimizerState) -> Result<()> {
    if !grads.same_shape(&model.params)
        || !state.first_moment.same_shape(&model.params)
        || !state.second_moment.same_shape(&model.params)
    {
        return Err(Error::Dimension("optimizer shapes do not match model".into()));
    }
    const NAMES: [&str; 4] = ["w1", "b1", "w2", "b2"];
    for (name, g) in NAMES.iter().zip(grads.slices()) {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;
    let params = model.params.slices_mut();
    let ms = state.first_moment.slices_mut();
    let vs = state.second_moment.slices_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads.slices()).zip(ms).zip(vs) {
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SPMLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint layout (little-endian): 8-byte magic `SPMLCKPT`, u32 format
/// version, u64 D, u64 H, u64 L, then f64 arrays w1 (D×H), b1 (H),
/// w2 (H×L), b2 (L), each row-major.
pub fn write_checkpoint(model: &MlpModel, w: &mut impl Write) -> std::io::Result<()> {
    let (d, h, l) = model.dims();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for dim in [d, h, l] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for s in model.params.slices() {
        for v in s {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<MlpModel> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for dim in &mut dims {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        *dim = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("dimension overflow"))?;
        if *dim == 0 || *dim > 1 << 24 {
            return Err(Error::Checkpoint(format!("implausible dimension {dim}")));
        }
    }
    let [d, h, l] = dims;
    let mut params = Params::zeros(d, h, l);
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8).map_err(|_| bad("truncated parameters"))?;
            *v = f64::from_le_bytes(b8);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(bad("trailing bytes"));
    }
    MlpModel::from_params(params)
}
