//! The `spml` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
//! Set `SPML_NO_COLOR` to disable ANSI styling.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::data::{self, DatasetFile, SynthConfig};
use crate::error::Error;
use crate::losses::{LossKind, DEFAULT_EM_ALPHA};
use crate::metrics::mean_average_precision;
use crate::model::MlpModel;
use crate::par::Execution;
use crate::pipeline::{self, DataSource, ExperimentConfig, TrainConfig, TrainingLabels};
use crate::pseudo::{avg_positives_per_example, PseudoLabelConfig};
use crate::report::{self, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Split(_) | Error::Dimension(_) | Error::Json(_) => CliError::Usage(e.to_string()),
            Error::Cell { ref source, .. } if matches!(**source, Error::Config(_)) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn use_color() -> bool {
    std::env::var_os("SPML_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn paint(code: &str, text: &str) -> String {
    if use_color() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn parse_unit_open(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0, 1), got {v}"))
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("tau must be in [0, 1), got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "spml", version, about = "Single-positive multi-label learning with pseudo multi-labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fully-labeled dataset.
    GenData(GenDataArgs),
    /// Keep one uniformly chosen positive per row of a kind=full dataset.
    Corrupt(CorruptArgs),
    /// Train one model with any loss and write a checkpoint.
    Train(TrainArgs),
    /// Teacher → pseudo multi-labels → student on a kind=single dataset.
    Algorithm1(Algorithm1Args),
    /// Threshold sweep with baselines and skyline.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint on a kind=full dataset.
    Eval(EvalArgs),
    /// Re-render charts from an existing results.csv.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub l: usize,
    #[arg(long, value_parser = parse_unit_open, default_value_t = 0.3)]
    pub pos_rate: f64,
    #[arg(long, value_parser = parse_non_negative, default_value_t = SynthConfig::default().noise_std)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct TrainFlags {
    #[arg(long, value_parser = parse_positive, default_value_t = TrainConfig::teacher_default().epochs)]
    pub epochs: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = TrainConfig::teacher_default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::teacher_default().learning_rate)]
    pub lr: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = TrainConfig::teacher_default().hidden_units)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_non_negative, default_value_t = DEFAULT_EM_ALPHA)]
    pub em_alpha: f64,
}

impl TrainFlags {
    fn config(&self, loss_kind: LossKind) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            hidden_units: self.hidden,
            seed: self.seed,
            loss_kind,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// kind=full for full-bce, kind=single for an/em.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_loss)]
    pub loss: LossKind,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct Algorithm1Args {
    /// A kind=single dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_tau)]
    pub tau: f64,
    #[arg(long)]
    pub keep_observed_positive: bool,
    #[arg(long, value_parser = parse_loss, default_value = "em")]
    pub teacher_loss: LossKind,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Output directory for teacher.ckpt, student.ckpt and pseudo.txt.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Use a kind=full dataset file instead of synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long, value_parser = parse_unit_open)]
    pub pos_rate: Option<f64>,
    #[arg(long, value_parser = parse_non_negative)]
    pub noise: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_tau)]
    pub taus: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_loss)]
    pub teacher_loss: Option<LossKind>,
    #[arg(long)]
    pub keep_observed_positive: bool,
    #[arg(long, value_parser = parse_non_negative)]
    pub em_alpha: Option<f64>,
    /// Epochs for teacher, baselines, skyline and student.
    #[arg(long, value_parser = parse_positive)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub hidden: Option<usize>,
    /// Worker threads for independent cells; 1 runs sequentially.
    #[arg(long, value_parser = parse_positive)]
    pub jobs: Option<usize>,
    /// Record measured wall time (results are then not byte-reproducible).
    #[arg(long)]
    pub record_wall_time: bool,
    /// Skip writing checkpoints and pseudo-label datasets.
    #[arg(long)]
    pub no_artifacts: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A kind=full dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Write per-class AP here.
    #[arg(long)]
    pub per_class_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Chart directory; defaults to `charts/` next to the results file.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let mut cmd = <Cli as clap::CommandFactory>::command();
    if std::env::var_os("SPML_NO_COLOR").is_some() {
        cmd = cmd.color(clap::ColorChoice::Never);
    }
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (label, msg) = match &e {
                CliError::Usage(m) => ("usage error", m),
                CliError::Runtime(m) => ("error", m),
            };
            eprintln!("{}: {msg}", paint("1;31", label));
            ExitCode::from(e.code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Corrupt(a) => cmd_corrupt(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Algorithm1(a) => cmd_algorithm1(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

pub fn cmd_gen_data(a: &GenDataArgs) -> CliResult {
    let cfg = SynthConfig {
        n: a.n,
        d: a.d,
        l: a.l,
        target_positive_rate: a.pos_rate,
        noise_std: a.noise,
        seed: a.seed,
    };
    let (features, labels) = data::generate_synthetic(&cfg)?;
    let avg = avg_positives_per_example(&labels)?;
    data::save_dataset(&a.output, &DatasetFile::Full { features, labels })?;
    println!("N={} D={} L={} avg_positives_per_row={avg}", a.n, a.d, a.l);
    println!("{} {}", paint("32", "wrote"), a.output.display());
    Ok(())
}

fn load_full(path: &Path) -> CliResult<(data::FeatureMatrix, data::FullLabelMatrix)> {
    match data::load_dataset(path)? {
        DatasetFile::Full { features, labels } => Ok((features, labels)),
        DatasetFile::Single(_) => Err(CliError::Usage(format!(
            "{} is kind=single; this command needs full labels (kind=full)",
            path.display()
        ))),
    }
}

fn load_single(path: &Path) -> CliResult<data::SinglePositiveDataset> {
    match data::load_dataset(path)? {
        DatasetFile::Single(s) => Ok(s),
        DatasetFile::Full { .. } => Err(CliError::Usage(format!(
            "{} is kind=full; corrupt it to kind=single first",
            path.display()
        ))),
    }
}

pub fn cmd_corrupt(a: &CorruptArgs) -> CliResult {
    let (features, labels) = load_full(&a.input)?;
    let spml = data::corrupt_to_single_positive(&labels, &features, a.seed)?;
    data::save_dataset(&a.output, &DatasetFile::Single(spml))?;
    println!("{} {}", paint("32", "wrote"), a.output.display());
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> CliResult {
    let cfg = a.train.config(a.loss);
    let trained = if a.loss.is_single_positive() {
        let spml = load_single(&a.data)?;
        pipeline::train_teacher(&spml, &cfg, a.train.em_alpha)?
    } else {
        let (features, labels) = load_full(&a.data)?;
        pipeline::train_model(&features, TrainingLabels::GroundTruth(&labels), labels.ncols(), &cfg, a.train.em_alpha)?
    };
    trained.model.save(&a.output)?;
    let last = trained.loss_history.last().copied().unwrap_or(f64::NAN);
    println!("loss={} epochs={} final_train_loss={last}", a.loss, cfg.epochs);
    println!("{} {}", paint("32", "wrote"), a.output.display());
    Ok(())
}

pub fn cmd_algorithm1(a: &Algorithm1Args) -> CliResult {
    let spml = load_single(&a.data)?;
    let teacher_cfg = a.train.config(a.teacher_loss);
    let student_cfg = a.train.config(LossKind::FullBce);
    let pcfg = PseudoLabelConfig::new(a.tau, a.keep_observed_positive)?;
    let out = pipeline::run_algorithm1(&spml, &teacher_cfg, &student_cfg, &pcfg, a.train.em_alpha)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    out.teacher.model.save(&a.out.join("teacher.ckpt"))?;
    out.student.model.save(&a.out.join("student.ckpt"))?;
    data::save_dataset(
        &a.out.join("pseudo.txt"),
        &DatasetFile::Full {
            features: spml.features.clone(),
            labels: out.pseudo.labels().clone(),
        },
    )?;
    println!(
        "tau={} avg_pseudo_positives={}",
        a.tau,
        avg_positives_per_example(out.pseudo.labels())?
    );
    println!("{} {}", paint("32", "wrote"), a.out.display());
    Ok(())
}

/// Resolves the sweep config: defaults, then the JSON file, then flags.
pub fn resolve_sweep_config(a: &SweepArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &a.data {
        cfg.data = DataSource::File { path: path.clone() };
    }
    let synth_flags = a.n.is_some() || a.d.is_some() || a.l.is_some() || a.pos_rate.is_some() || a.noise.is_some();
    match &mut cfg.data {
        DataSource::Synthetic(s) => {
            s.n = a.n.unwrap_or(s.n);
            s.d = a.d.unwrap_or(s.d);
            s.l = a.l.unwrap_or(s.l);
            s.target_positive_rate = a.pos_rate.unwrap_or(s.target_positive_rate);
            s.noise_std = a.noise.unwrap_or(s.noise_std);
        }
        DataSource::File { .. } if synth_flags => {
            return Err(CliError::Usage("synthetic data flags conflict with a dataset file".into()))
        }
        DataSource::File { .. } => {}
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(t) = &a.taus {
        cfg.tau_grid = t.clone();
    }
    if let Some(k) = a.teacher_loss {
        cfg.teacher.loss_kind = k;
    }
    if a.keep_observed_positive {
        cfg.keep_observed_positive = true;
    }
    if let Some(alpha) = a.em_alpha {
        cfg.em_alpha = alpha;
    }
    if let Some(e) = a.epochs {
        cfg.teacher.epochs = e;
        cfg.student.epochs = e;
    }
    if let Some(h) = a.hidden {
        cfg.teacher.hidden_units = h;
        cfg.student.hidden_units = h;
    }
    if a.record_wall_time {
        cfg.record_wall_time = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

fn write_file(root: &Path, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>, listed: &mut Vec<PathBuf>) -> CliResult {
    let rel = rel.as_ref();
    let p = root.join(rel);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    listed.push(rel.to_path_buf());
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult {
    let cfg = resolve_sweep_config(a)?;
    if a.out.exists() {
        let is_run = a.out.join("manifest.json").exists();
        let is_empty = std::fs::read_dir(&a.out).map(|mut d| d.next().is_none()).unwrap_or(false);
        if !is_run && !is_empty {
            return Err(CliError::Usage(format!(
                "{} exists and is not a previous run directory",
                a.out.display()
            )));
        }
    }
    let started_at = chrono::Utc::now().to_rfc3339();
    let output = Execution::with_jobs(a.jobs, |exec| pipeline::run_sweep(&cfg, exec))?;

    let stage = staging_dir(&a.out);
    let result = (|| -> CliResult {
        let _ = std::fs::remove_dir_all(&stage);
        std::fs::create_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
        let mut artifacts = Vec::new();
        let csv = report::results_csv_string(&output.rows)?;
        write_file(&stage, "results.csv", &csv, &mut artifacts)?;
        let records: Vec<_> = output.rows.iter().map(report::ResultRecord::from).collect();
        write_file(&stage, "charts/map_vs_tau.svg", report::map_chart(&records), &mut artifacts)?;
        write_file(&stage, "charts/labels_vs_tau.svg", report::labels_chart(&records), &mut artifacts)?;
        if !a.no_artifacts {
            for s in &output.seeds {
                let dir = PathBuf::from("checkpoints").join(format!("seed-{}", s.seed));
                let models = [
                    ("teacher", &s.teacher),
                    ("an_baseline", &s.an_baseline),
                    ("em_baseline", &s.em_baseline),
                    ("skyline", &s.skyline),
                ];
                let mut ckpts: Vec<(PathBuf, &MlpModel)> =
                    models.iter().map(|(n, m)| (dir.join(format!("{n}.ckpt")), &m.model)).collect();
                for c in &s.cells {
                    ckpts.push((dir.join(format!("student_tau-{}.ckpt", c.tau)), &c.student.model));
                }
                for (rel, m) in ckpts {
                    let mut buf = Vec::new();
                    crate::model::write_checkpoint(m, &mut buf).map_err(|e| Error::io(&rel, e))?;
                    write_file(&stage, rel, buf, &mut artifacts)?;
                }
                for c in &s.cells {
                    let text = data::format_dataset(&DatasetFile::Full {
                        features: s.train_features.clone(),
                        labels: c.pseudo.labels().clone(),
                    });
                    write_file(&stage, format!("pseudo/seed-{}_tau-{}.txt", s.seed, c.tau), text, &mut artifacts)?;
                }
            }
        }
        artifacts.push(PathBuf::from("manifest.json"));
        let manifest = RunManifest {
            tool: "spml".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: "sweep".into(),
            config: cfg.clone(),
            artifacts: artifacts.clone(),
            started_at: started_at.clone(),
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
        std::fs::write(stage.join("manifest.json"), json + "\n").map_err(|e| Error::io(&stage, e))?;
        if a.out.exists() {
            std::fs::remove_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
        }
        std::fs::rename(&stage, &a.out).map_err(|e| Error::io(&a.out, e))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&stage);
    }
    result?;

    let means = report::mean_rows(&output.rows.iter().map(report::ResultRecord::from).collect::<Vec<_>>());
    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "tau", "avg_pos", "student", "an", "em", "full");
    for m in &means {
        println!(
            "{:>6} {:>8.3} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            m.tau, m.avg_pseudo_positives, m.student_map, m.an_baseline_map, m.em_baseline_map, m.full_supervision_map
        );
    }
    println!("{} {}", paint("32", "wrote"), a.out.display());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult {
    let model = MlpModel::load(&a.checkpoint)?;
    let (features, labels) = load_full(&a.data)?;
    let (d, _, l) = model.dims();
    if features.ncols() != d || labels.ncols() != l {
        return Err(CliError::Usage(format!(
            "dimension mismatch: checkpoint expects D={d} L={l}, dataset has D={} L={}",
            features.ncols(),
            labels.ncols()
        )));
    }
    let probs = model.predict(features.view())?;
    let rep = mean_average_precision(probs.view(), &labels)?;
    println!("MAP={}", rep.map);
    println!("classes_evaluated={}/{}", rep.n_classes_evaluated, l);
    for (c, ap) in rep.per_class_ap.iter().enumerate() {
        match ap {
            Some(v) => println!("class {c}: AP={v}"),
            None => println!("class {c}: AP=undefined (no positives)"),
        }
    }
    if let Some(path) = &a.per_class_csv {
        let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
        w.write_record(["class", "ap"]).map_err(Error::from)?;
        for (c, ap) in rep.per_class_ap.iter().enumerate() {
            w.write_record([c.to_string(), ap.map(|v| v.to_string()).unwrap_or_default()])
                .map_err(Error::from)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn cmd_plot(a: &PlotArgs) -> CliResult {
    let records = report::read_results_csv(&a.results)?;
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => a.results.parent().unwrap_or(Path::new(".")).join("charts"),
    };
    for p in report::write_charts(&dir, &records)? {
        println!("{} {}", paint("32", "wrote"), p.display());
    }
    Ok(())
}
