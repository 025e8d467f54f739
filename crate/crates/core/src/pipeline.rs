//! Teacher/student training and the threshold sweep.
//!
//! The pseudo-multi-label procedure:
//!
//! 1. train a teacher on single-positive data (AN or EM loss);
//! 2. run the teacher over the training features;
//! 3. threshold its probabilities at `tau` into hard labels;
//! 4. train a student with full-supervision BCE on those labels.
//!
//! [`run_sweep`] repeats this for every `tau` and seed, alongside the AN and
//! EM baselines and a skyline trained on the true labels, and evaluates
//! everything on the uncorrupted test split.

use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{
    self, corrupt_to_single_positive, split_dataset, DatasetFile, DatasetSplit, FeatureMatrix,
    FullLabelMatrix, SinglePositiveDataset, SplitFractions, SynthConfig,
};
use crate::error::{Error, Result};
use crate::losses::{self, LossConfig, LossKind, Targets, DEFAULT_EM_ALPHA};
use crate::metrics::{mean_average_precision, EvalReport};
use crate::model::{optimizer_step, MlpModel, OptimizerState, ProbMatrix};
use crate::par::Execution;
use crate::pseudo::{avg_positives_per_example, make_pseudo_labels, PseudoLabelConfig, PseudoLabelMatrix};
use crate::seed;

pub const DEFAULT_TAU_GRID: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.95];
pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_units: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
}

impl TrainConfig {
    pub fn teacher_default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 2e-3,
            hidden_units: 64,
            seed: 0,
            loss_kind: LossKind::EntropyMax,
        }
    }

    pub fn student_default() -> Self {
        TrainConfig {
            loss_kind: LossKind::FullBce,
            ..TrainConfig::teacher_default()
        }
    }

    pub fn with_loss(self, loss_kind: LossKind) -> Self {
        TrainConfig { loss_kind, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrainConfig { seed, ..self }
    }

    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_units == 0 {
            return Err(Error::Config(format!(
                "epochs, batch_size and hidden_units must be >= 1 (got {}, {}, {})",
                self.epochs, self.batch_size, self.hidden_units
            )));
        }
        if self.batch_size > n_train {
            return Err(Error::Config(format!(
                "batch_size {} exceeds training set size {n_train}",
                self.batch_size
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Which kind of labels a model was fit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    SinglePositive,
    PseudoLabels,
    GroundTruth,
}

/// Labels handed to [`train_model`].
#[derive(Debug, Clone, Copy)]
pub enum TrainingLabels<'a> {
    SinglePositive(&'a [usize]),
    Pseudo(&'a PseudoLabelMatrix),
    GroundTruth(&'a FullLabelMatrix),
}

impl TrainingLabels<'_> {
    pub fn source(&self) -> LabelSource {
        match self {
            TrainingLabels::SinglePositive(_) => LabelSource::SinglePositive,
            TrainingLabels::Pseudo(_) => LabelSource::PseudoLabels,
            TrainingLabels::GroundTruth(_) => LabelSource::GroundTruth,
        }
    }

    fn len(&self) -> usize {
        match self {
            TrainingLabels::SinglePositive(z) => z.len(),
            TrainingLabels::Pseudo(y) => y.labels().nrows(),
            TrainingLabels::GroundTruth(y) => y.nrows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub label_source: LabelSource,
    pub loss_kind: LossKind,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Mini-batch Adam training with a seeded per-epoch shuffle. The model is
/// initialized from `derive(cfg.seed, "init")` and batches are drawn from
/// `derive(cfg.seed, "shuffle")`.
pub fn train_model(
    features: &FeatureMatrix,
    labels: TrainingLabels<'_>,
    label_count: usize,
    cfg: &TrainConfig,
    em_alpha: f64,
) -> Result<TrainedModel> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} feature rows but {} label rows", labels.len())));
    }
    cfg.validate(n)?;
    let loss_cfg = LossConfig::new(cfg.loss_kind, em_alpha)?;
    match (cfg.loss_kind.is_single_positive(), labels.source()) {
        (true, LabelSource::SinglePositive) | (false, LabelSource::PseudoLabels | LabelSource::GroundTruth) => {}
        (_, src) => {
            return Err(Error::Config(format!(
                "loss {} cannot train on {src:?} labels",
                cfg.loss_kind
            )))
        }
    }
    let full_targets = match labels {
        TrainingLabels::Pseudo(y) => Some(y.labels().to_f64()),
        TrainingLabels::GroundTruth(y) => Some(y.to_f64()),
        TrainingLabels::SinglePositive(_) => None,
    };
    if let Some(y) = &full_targets {
        if y.ncols() != label_count {
            return Err(Error::Dimension(format!("labels have {} columns, expected L={label_count}", y.ncols())));
        }
    }

    let mut model = MlpModel::init(features.ncols(), cfg.hidden_units, label_count, seed::derive(cfg.seed, "init"))?;
    let mut opt = OptimizerState::new(&model, cfg.learning_rate)?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "shuffle"));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let x = features.view();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let fail = |msg: String| Error::Training { epoch, batch, msg };
            let xb = x.select(Axis(0), idx);
            let pass = model.forward(xb.view())?;
            let yb;
            let zb: Vec<usize>;
            let targets = match (&full_targets, labels) {
                (Some(y), _) => {
                    yb = y.select(Axis(0), idx);
                    Targets::Full(yb.view())
                }
                (None, TrainingLabels::SinglePositive(z)) => {
                    zb = idx.iter().map(|&i| z[i]).collect();
                    Targets::Single(&zb)
                }
                (None, _) => unreachable!("full targets materialized above"),
            };
            let out = losses::compute(&loss_cfg, &pass.probs, targets)?;
            if !out.value.is_finite() {
                return Err(fail(format!("non-finite loss {}", out.value)));
            }
            let grads = model.backward(xb.view(), &pass, out.dloss_dlogits.view())?;
            optimizer_step(&mut model, &grads, &mut opt).map_err(|e| fail(e.to_string()))?;
            epoch_loss += out.value * idx.len() as f64;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(TrainedModel {
        model,
        label_source: labels.source(),
        loss_kind: cfg.loss_kind,
        loss_history: history,
    })
}

/// Teacher training on single-positive data. Only AN and EM are accepted.
pub fn train_teacher(spml: &SinglePositiveDataset, cfg: &TrainConfig, em_alpha: f64) -> Result<TrainedModel> {
    if !cfg.loss_kind.is_single_positive() {
        return Err(Error::Config(format!(
            "teacher loss must be an or em, got {}",
            cfg.loss_kind
        )));
    }
    train_model(
        &spml.features,
        TrainingLabels::SinglePositive(&spml.observed_positive),
        spml.label_count,
        cfg,
        em_alpha,
    )
}

/// Student training: full-supervision BCE on pseudo labels.
pub fn train_student(features: &FeatureMatrix, pseudo: &PseudoLabelMatrix, cfg: &TrainConfig) -> Result<TrainedModel> {
    if cfg.loss_kind != LossKind::FullBce {
        return Err(Error::Config(format!("student loss must be full-bce, got {}", cfg.loss_kind)));
    }
    let l = pseudo.labels().ncols();
    train_model(features, TrainingLabels::Pseudo(pseudo), l, cfg, DEFAULT_EM_ALPHA)
}

/// Skyline training on the true labels.
pub fn train_skyline(features: &FeatureMatrix, labels: &FullLabelMatrix, cfg: &TrainConfig) -> Result<TrainedModel> {
    let cfg = cfg.with_loss(LossKind::FullBce);
    train_model(features, TrainingLabels::GroundTruth(labels), labels.ncols(), &cfg, DEFAULT_EM_ALPHA)
}

#[derive(Debug, Clone)]
pub struct StudentRun {
    pub pseudo: PseudoLabelMatrix,
    pub student: TrainedModel,
}

/// Thresholds teacher probabilities over the training set and fits a student
/// on the result.
pub fn pseudo_label_and_train_student(
    teacher_probs: &ProbMatrix,
    spml: &SinglePositiveDataset,
    student_cfg: &TrainConfig,
    pseudo_cfg: &PseudoLabelConfig,
) -> Result<StudentRun> {
    let pseudo = make_pseudo_labels(teacher_probs, pseudo_cfg, Some(&spml.observed_positive))?;
    let student = train_student(&spml.features, &pseudo, student_cfg)?;
    Ok(StudentRun { pseudo, student })
}

#[derive(Debug, Clone)]
pub struct Algorithm1Output {
    pub teacher: TrainedModel,
    /// Teacher probabilities on the training features.
    pub teacher_probs: ProbMatrix,
    pub pseudo: PseudoLabelMatrix,
    pub student: TrainedModel,
}

/// The full teacher → pseudo labels → student procedure.
pub fn run_algorithm1(
    spml: &SinglePositiveDataset,
    teacher_cfg: &TrainConfig,
    student_cfg: &TrainConfig,
    pseudo_cfg: &PseudoLabelConfig,
    em_alpha: f64,
) -> Result<Algorithm1Output> {
    pseudo_cfg.validate()?;
    let teacher = train_teacher(spml, teacher_cfg, em_alpha)?;
    let teacher_probs = teacher.model.predict(spml.features.view())?;
    let StudentRun { pseudo, student } = pseudo_label_and_train_student(&teacher_probs, spml, student_cfg, pseudo_cfg)?;
    Ok(Algorithm1Output {
        teacher,
        teacher_probs,
        pseudo,
        student,
    })
}

pub fn evaluate(model: &MlpModel, features: &FeatureMatrix, labels: &FullLabelMatrix) -> Result<EvalReport> {
    let probs = model.predict(features.view())?;
    mean_average_precision(probs.view(), labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// The generator's own `seed` is replaced per sweep seed.
    Synthetic(SynthConfig),
    /// A `kind=full` dataset file, re-split per sweep seed.
    File { path: std::path::PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub split: SplitFractions,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    pub tau_grid: Vec<f64>,
    pub keep_observed_positive: bool,
    pub seeds: Vec<u64>,
    pub em_alpha: f64,
    /// Write measured wall time into results; off keeps results
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SynthConfig::default()),
            split: SplitFractions::default(),
            teacher: TrainConfig::teacher_default(),
            student: TrainConfig::student_default(),
            tau_grid: DEFAULT_TAU_GRID.to_vec(),
            keep_observed_positive: false,
            seeds: DEFAULT_SEEDS.to_vec(),
            em_alpha: DEFAULT_EM_ALPHA,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_grid.is_empty() {
            return Err(Error::Config("tau_grid must not be empty".into()));
        }
        for t in &self.tau_grid {
            PseudoLabelConfig::new(*t, self.keep_observed_positive)?;
        }
        if self.tau_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("tau_grid must be strictly increasing, got {:?}", self.tau_grid)));
        }
        if !self.teacher.loss_kind.is_single_positive() {
            return Err(Error::Config(format!("teacher loss must be an or em, got {}", self.teacher.loss_kind)));
        }
        if self.student.loss_kind != LossKind::FullBce {
            return Err(Error::Config(format!("student loss must be full-bce, got {}", self.student.loss_kind)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        self.split.validate()?;
        LossConfig::new(LossKind::EntropyMax, self.em_alpha)?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }
}

/// Model roles within one sweep seed; each gets its own derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Teacher,
    AnBaseline,
    EmBaseline,
    Skyline,
    Student,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Teacher => "teacher",
            Role::AnBaseline => "an-baseline",
            Role::EmBaseline => "em-baseline",
            Role::Skyline => "skyline",
            Role::Student => "student",
        }
    }

    pub fn expected_source(self) -> LabelSource {
        match self {
            Role::Teacher | Role::AnBaseline | Role::EmBaseline => LabelSource::SinglePositive,
            Role::Skyline => LabelSource::GroundTruth,
            Role::Student => LabelSource::PseudoLabels,
        }
    }

    /// The training config this role uses in a sweep for `run_seed`.
    pub fn train_config(self, cfg: &ExperimentConfig, run_seed: u64) -> TrainConfig {
        let base = match self {
            Role::Teacher => cfg.teacher,
            Role::AnBaseline => cfg.teacher.with_loss(LossKind::AssumeNegative),
            Role::EmBaseline => cfg.teacher.with_loss(LossKind::EntropyMax),
            Role::Skyline | Role::Student => cfg.student,
        };
        base.with_seed(seed::derive(run_seed ^ base.seed, self.tag()))
    }
}

/// Data for one sweep seed: the split and the corrupted training set.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub split: DatasetSplit,
    pub spml: SinglePositiveDataset,
}

pub fn load_source(source: &DataSource, run_seed: u64) -> Result<(FeatureMatrix, FullLabelMatrix)> {
    match source {
        DataSource::Synthetic(s) => data::generate_synthetic(&SynthConfig {
            seed: seed::derive(run_seed, "data"),
            ..*s
        }),
        DataSource::File { path } => match data::load_dataset(path)? {
            DatasetFile::Full { features, labels } => Ok((features, labels)),
            DatasetFile::Single(_) => Err(Error::Config(format!(
                "{}: sweeps need a kind=full dataset",
                path.display()
            ))),
        },
    }
}

/// Generates (or loads), splits and corrupts the data for one seed. Only the
/// train partition is corrupted.
pub fn prepare_seed_data(cfg: &ExperimentConfig, run_seed: u64) -> Result<SeedData> {
    let (x, y) = load_source(&cfg.data, run_seed)?;
    let split = split_dataset(&x, &y, cfg.split, seed::derive(run_seed, "split"))?;
    let spml = corrupt_to_single_positive(&split.train.labels, &split.train.features, seed::derive(run_seed, "corrupt"))?;
    Ok(SeedData { split, spml })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResultRow {
    pub seed: u64,
    pub tau: f64,
    pub avg_pseudo_positives: f64,
    pub teacher_map: f64,
    pub student_map: f64,
    pub an_baseline_map: f64,
    pub em_baseline_map: f64,
    pub full_supervision_map: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct CellArtifacts {
    pub tau: f64,
    pub pseudo: PseudoLabelMatrix,
    pub student: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub train_features: FeatureMatrix,
    pub teacher: TrainedModel,
    pub an_baseline: TrainedModel,
    pub em_baseline: TrainedModel,
    pub skyline: TrainedModel,
    pub cells: Vec<CellArtifacts>,
}

impl SeedArtifacts {
    /// (role, label kind consumed) for every model trained under this seed.
    pub fn audit(&self) -> Vec<(Role, LabelSource)> {
        let mut v = vec![
            (Role::Teacher, self.teacher.label_source),
            (Role::AnBaseline, self.an_baseline.label_source),
            (Role::EmBaseline, self.em_baseline.label_source),
            (Role::Skyline, self.skyline.label_source),
        ];
        v.extend(self.cells.iter().map(|c| (Role::Student, c.student.label_source)));
        v
    }

    fn check_hygiene(&self) -> Result<()> {
        for (role, src) in self.audit() {
            if src != role.expected_source() {
                return Err(Error::Config(format!(
                    "label hygiene violated: {} trained on {src:?}",
                    role.tag()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Sorted by (seed, tau).
    pub rows: Vec<SweepResultRow>,
    pub seeds: Vec<SeedArtifacts>,
}

fn elapsed(cfg: &ExperimentConfig, start: Instant) -> f64 {
    if cfg.record_wall_time {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn run_seed(cfg: &ExperimentConfig, run_seed: u64, exec: Execution) -> Result<(Vec<SweepResultRow>, SeedArtifacts)> {
    let seed_err = |e: Error| Error::Cell {
        seed: run_seed,
        tau: f64::NAN,
        source: Box::new(e),
    };
    let start = Instant::now();
    let data = prepare_seed_data(cfg, run_seed).map_err(seed_err)?;
    let spml = &data.spml;
    let train = &data.split.train;
    let test = &data.split.test;

    let roles = [Role::Teacher, Role::AnBaseline, Role::EmBaseline, Role::Skyline];
    let mut trained = exec
        .try_map(&roles, |&role| {
            let tc = role.train_config(cfg, run_seed);
            match role {
                Role::Skyline => train_skyline(&train.features, &train.labels, &tc),
                _ => train_teacher(spml, &tc, cfg.em_alpha),
            }
        })
        .map_err(seed_err)?
        .into_iter();
    let mut next = || trained.next().expect("one model per role");
    let (teacher, an_baseline, em_baseline, skyline) = (next(), next(), next(), next());

    let maps = exec
        .try_map(&[&teacher, &an_baseline, &em_baseline, &skyline], |m| {
            evaluate(&m.model, &test.features, &test.labels).map(|r| r.map)
        })
        .map_err(seed_err)?;
    let (teacher_map, an_map, em_map, sky_map) = (maps[0], maps[1], maps[2], maps[3]);
    let teacher_probs = teacher.model.predict(spml.features.view()).map_err(seed_err)?;
    let shared_time = elapsed(cfg, start);

    let student_cfg = Role::Student.train_config(cfg, run_seed);
    let cells = exec.try_map(&cfg.tau_grid, |&tau| {
        let cell_start = Instant::now();
        let run = || -> Result<(SweepResultRow, CellArtifacts)> {
            let pcfg = PseudoLabelConfig::new(tau, cfg.keep_observed_positive)?;
            let StudentRun { pseudo, student } =
                pseudo_label_and_train_student(&teacher_probs, spml, &student_cfg, &pcfg)?;
            let student_map = evaluate(&student.model, &test.features, &test.labels)?.map;
            let row = SweepResultRow {
                seed: run_seed,
                tau,
                avg_pseudo_positives: avg_positives_per_example(pseudo.labels())?,
                teacher_map,
                student_map,
                an_baseline_map: an_map,
                em_baseline_map: em_map,
                full_supervision_map: sky_map,
                wall_time_s: if cfg.record_wall_time { shared_time + elapsed(cfg, cell_start) } else { 0.0 },
            };
            Ok((row, CellArtifacts { tau, pseudo, student }))
        };
        run().map_err(|e| Error::Cell {
            seed: run_seed,
            tau,
            source: Box::new(e),
        })
    })?;
    let (rows, cells): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
    let artifacts = SeedArtifacts {
        seed: run_seed,
        train_features: spml.features.clone(),
        teacher,
        an_baseline,
        em_baseline,
        skyline,
        cells,
    };
    artifacts.check_hygiene()?;
    Ok((rows, artifacts))
}

/// Runs every (seed, tau) cell. Baselines, skyline and teacher are trained
/// once per seed and shared across that seed's thresholds.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepOutput> {
    cfg.validate()?;
    let per_seed = exec.try_map(&cfg.seeds, |&s| run_seed(cfg, s, exec))?;
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for (r, a) in per_seed {
        rows.extend(r);
        seeds.push(a);
    }
    rows.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.tau.total_cmp(&b.tau)));
    seeds.sort_by_key(|a| a.seed);
    Ok(SweepOutput { rows, seeds })
}
