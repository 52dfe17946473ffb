//! Train → cluster → evaluate orchestration and report files.
//!
//! A run writes into its output directory:
//!
//! | file              | content |
//! |-------------------|---------|
//! | `history.csv`     | `epoch,L_I[,L_F or L_FO][,acc,nmi,ari],lr`, one row per epoch; metric cells are empty on epochs without evaluation and the metric columns are absent when evaluation is disabled |
//! | `summary.json`    | [`RunReport`] plus the resolved configuration |
//! | `config.txt`      | the resolved configuration |
//! | `correlation.csv` | `d × d` feature correlation of the final representations |
//! | `embeddings.csv`  | final representations, with a `label` column when labels exist |
//! | `assignments.csv` | `index,cluster[,label]` of the final k-means partition |
//! | `checkpoint.txt`  | final training state, when enabled |
//! | `FAILED`          | error message, only when the run aborts |
//!
//! Sweeps write one run directory per value plus `sweep.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{ClusterSource, RunConfig};
use crate::dataset::{gen_sphere_mixture, load_dataset, DataFormat, Dataset};
use crate::encoder::encode;
use crate::error::{IdfdError, Result};
use crate::kmeans::kmeans;
use crate::linalg::Matrix;
use crate::losses::{LossMode, INSTANCE};
use crate::metrics::{feature_correlation, score, ClusterScores, Partition};
use crate::rng::SeededRng;
use crate::spectral::spectral_cluster;
use crate::train::{schedule_table, train_with, EpochRecord, TrainState};

/// Stream offset for evaluation randomness, kept apart from training streams.
const EVAL_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub mode: String,
    pub seed: u64,
    pub epochs: usize,
    pub clusters: usize,
    pub final_loss: Option<f64>,
    pub final_scores: Option<ClusterScores>,
    /// Mean and population standard deviation of ACC over the trailing
    /// evaluation window.
    pub window_acc_mean: Option<f64>,
    pub window_acc_std: Option<f64>,
    pub window_len: usize,
    pub spectral_scores: Option<ClusterScores>,
    pub mean_abs_feature_correlation: f64,
    /// `(first epoch, lr)` steps of the schedule.
    pub schedule: Vec<(usize, f64)>,
    pub history: Vec<EpochRecord>,
}

/// Dataset named by the config, or the seeded sphere mixture.
pub fn resolve_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => load_dataset(path, DataFormat::from_path(path)),
        None => {
            let s = &cfg.synthetic;
            let seed = s.seed.unwrap_or(cfg.seed());
            gen_sphere_mixture(s.k, s.n, s.dim, s.separation, s.noise, &mut SeededRng::new(seed))
        }
    }
}

fn representations(cfg: &RunConfig, x: &Matrix, state: &TrainState) -> Result<Matrix> {
    match cfg.cluster_on {
        ClusterSource::Fresh => encode(&state.params, x),
        ClusterSource::Bank => Ok(state.bank.rows().clone()),
    }
}

fn cluster(v: &Matrix, k: usize, restarts: usize, seed: u64, epoch: usize) -> Result<Partition> {
    let mut rng = SeededRng::new(seed).derive(EVAL_STREAM + epoch as u64);
    Ok(kmeans(v, k, &mut rng, restarts)?.partition)
}

fn is_eval_epoch(cfg: &RunConfig, epoch: usize) -> bool {
    cfg.eval_every > 0 && ((epoch + 1).is_multiple_of(cfg.eval_every) || epoch + 1 == cfg.train.epochs)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

struct HistoryWriter {
    out: BufWriter<File>,
    feature: Option<&'static str>,
    metrics: bool,
}

impl HistoryWriter {
    fn create(path: &Path, mode: LossMode, metrics: bool) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut header = vec!["epoch", INSTANCE];
        header.extend(mode.feature_term());
        if metrics {
            header.extend(["acc", "nmi", "ari"]);
        }
        header.push("lr");
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            feature: mode.feature_term(),
            metrics,
        })
    }

    fn row(&mut self, r: &EpochRecord) -> Result<()> {
        let mut cells = vec![r.epoch.to_string(), fmt_f64(r.components[INSTANCE])];
        if let Some(name) = self.feature {
            cells.push(fmt_f64(r.components[name]));
        }
        if self.metrics {
            match &r.scores {
                Some(s) => cells.extend([fmt_f64(s.acc), fmt_f64(s.nmi), fmt_f64(s.ari)]),
                None => cells.extend([String::new(), String::new(), String::new()]),
            }
        }
        cells.push(fmt_f64(r.lr));
        writeln!(self.out, "{}", cells.join(","))?;
        self.out.flush()?;
        Ok(())
    }
}

fn write_matrix(m: &Matrix, labels: Option<&[usize]>, header: bool, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if header {
        let mut names: Vec<String> = (0..m.cols()).map(|j| format!("v{j}")).collect();
        if labels.is_some() {
            names.push("label".into());
        }
        writeln!(out, "{}", names.join(","))?;
    }
    for (i, row) in m.iter_rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn window_stats(history: &[EpochRecord], window: usize) -> (Option<f64>, Option<f64>, usize) {
    let accs: Vec<f64> = history
        .iter()
        .filter_map(|r| r.scores.map(|s| s.acc))
        .collect();
    let tail = &accs[accs.len().saturating_sub(window)..];
    if tail.is_empty() {
        return (None, None, 0);
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / tail.len() as f64;
    (Some(mean), Some(var.sqrt()), tail.len())
}

/// Trains, evaluates and writes every report into `cfg.out_dir`.
///
/// If the run fails after the output directory exists, the error message is
/// written to `FAILED` next to whatever was already flushed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let marker = cfg.out_dir.join("FAILED");
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    let result = run_inner(cfg);
    if let Err(e) = &result {
        let _ = std::fs::write(&marker, format!("{e}\n"));
    }
    result
}

fn run_inner(cfg: &RunConfig) -> Result<RunReport> {
    let ds = resolve_dataset(cfg)?;
    run_on_dataset(cfg, &ds)
}

/// [`run_experiment`] on an already loaded dataset.
pub fn run_on_dataset(cfg: &RunConfig, ds: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("config.txt"), cfg.to_text())?;
    let k = cfg
        .clusters
        .or_else(|| ds.k_true())
        .ok_or_else(|| IdfdError::Config("clusters must be set for unlabeled data".into()))?;
    if k > ds.len() {
        return Err(IdfdError::Config(format!("{k} clusters for {} samples", ds.len())));
    }
    let truth = ds.labels.as_deref().map(Partition::from_labels).transpose()?;
    let evaluate = cfg.eval_every > 0 && truth.is_some();
    let x = &ds.samples;
    let seed = cfg.seed();

    let mut writer = HistoryWriter::create(&cfg.out_dir.join("history.csv"), cfg.mode, evaluate)?;
    let outcome = train_with(x, ds.shape, &cfg.train, &cfg.augment, cfg.mode, &mut |state, record| {
        if let (Some(y), true) = (&truth, evaluate && is_eval_epoch(cfg, record.epoch)) {
            let v = representations(cfg, x, state)?;
            let p = cluster(&v, k, cfg.restarts, seed, record.epoch)?;
            record.scores = Some(score(y, &p)?);
        }
        writer.row(record)
    })?;

    let state = &outcome.state;
    let v = representations(cfg, x, state)?;
    let corr = feature_correlation(&v)?;
    crate::spectral::write_matrix_csv(&corr.matrix, &cfg.out_dir.join("correlation.csv"))?;
    write_matrix(&v, ds.labels.as_deref(), true, &cfg.out_dir.join("embeddings.csv"))?;

    let final_partition = cluster(&v, k, cfg.restarts, seed, cfg.train.epochs)?;
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("assignments.csv"))?);
        writeln!(out, "{}", if ds.labels.is_some() { "index,cluster,label" } else { "index,cluster" })?;
        for (i, &c) in final_partition.assignments().iter().enumerate() {
            match &ds.labels {
                Some(l) => writeln!(out, "{i},{c},{}", l[i])?,
                None => writeln!(out, "{i},{c}")?,
            }
        }
        out.flush()?;
    }

    let spectral_scores = match (&truth, cfg.spectral) {
        (Some(y), true) => {
            let mut rng = SeededRng::new(seed).derive(EVAL_STREAM - 1);
            let p = spectral_cluster(&v, cfg.train.tau, k, &mut rng, cfg.restarts)?;
            Some(score(y, &p)?)
        }
        _ => None,
    };
    let final_scores = match &truth {
        Some(_) if evaluate => outcome.history.last().and_then(|r| r.scores),
        Some(y) => Some(score(y, &final_partition)?),
        None => None,
    };
    if cfg.checkpoint {
        checkpoint::save(state, &cfg.out_dir.join("checkpoint.txt"))?;
    }

    let (mean, std, len) = window_stats(&outcome.history, cfg.eval_window);
    let report = RunReport {
        config_hash: cfg.hash(),
        mode: cfg.mode.to_string(),
        seed,
        epochs: cfg.train.epochs,
        clusters: k,
        final_loss: outcome.history.last().map(|r| r.loss),
        final_scores,
        window_acc_mean: mean,
        window_acc_std: std,
        window_len: len,
        spectral_scores,
        mean_abs_feature_correlation: corr.mean_abs_off_diagonal(),
        schedule: schedule_table(&cfg.train, cfg.train.epochs),
        history: outcome.history,
    };
    let summary = serde_json::json!({
        "report": &report,
        "config": cfg.to_text().lines().filter_map(|l| l.split_once(" = ")).map(|(k, v)| (k.to_string(), v.to_string())).collect::<std::collections::BTreeMap<_, _>>(),
    });
    std::fs::write(cfg.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(report)
}

/// Reads the report back from a run directory.
pub fn load_report(dir: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(serde_json::from_value(value["report"].clone())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    Tau,
    Tau2,
    Alpha,
}

impl SweepParameter {
    pub fn key(self) -> &'static str {
        match self {
            Self::Tau => "tau",
            Self::Tau2 => "tau2",
            Self::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = IdfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "tau2" => Ok(Self::Tau2),
            "alpha" => Ok(Self::Alpha),
            _ => Err(IdfdError::Config(format!("cannot sweep {s:?}; use tau, tau2 or alpha"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Largest minus smallest window-mean ACC.
    pub fn acc_range(&self) -> Option<f64> {
        let means: Vec<f64> = self.rows.iter().filter_map(|r| r.report.window_acc_mean).collect();
        if means.is_empty() {
            return None;
        }
        let max = means.iter().copied().fold(f64::MIN, f64::max);
        let min = means.iter().copied().fold(f64::MAX, f64::min);
        Some(max - min)
    }
}

/// Configuration of the run for one sweep value.
pub fn sweep_config(cfg: &RunConfig, parameter: SweepParameter, value: f64) -> Result<RunConfig> {
    let mut run = cfg.clone();
    run.set(parameter.key(), &fmt_f64(value))?;
    run.out_dir = cfg.out_dir.join(format!("{}={}", parameter.key(), fmt_f64(value)));
    Ok(run)
}

/// One run per value (into `out_dir/<param>=<value>`) and a consolidated
/// `sweep.csv`: `parameter,value,acc_mean,acc_std,final_acc,final_nmi,final_ari,feature_corr`.
pub fn sweep(cfg: &RunConfig, parameter: SweepParameter, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(IdfdError::Config("sweep needs at least one value".into()));
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let ds = resolve_dataset(cfg)?;
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let run = sweep_config(cfg, parameter, value)?;
        let report = run_on_dataset(&run, &ds).inspect_err(|e| {
            let _ = std::fs::create_dir_all(&run.out_dir);
            let _ = std::fs::write(run.out_dir.join("FAILED"), format!("{e}\n"));
        })?;
        rows.push(SweepRow { value, report });
    }
    let report = SweepReport { parameter, rows };
    write_sweep_csv(&report, &cfg.out_dir.join("sweep.csv"))?;
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "parameter,value,acc_mean,acc_std,final_acc,final_nmi,final_ari,feature_corr")?;
    for row in &report.rows {
        let r = &row.report;
        let s = r.final_scores;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            report.parameter.key(),
            fmt_f64(row.value),
            opt(r.window_acc_mean),
            opt(r.window_acc_std),
            opt(s.map(|s| s.acc)),
            opt(s.map(|s| s.nmi)),
            opt(s.map(|s| s.ari)),
            fmt_f64(r.mean_abs_feature_correlation),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Paths of the files a finished run leaves behind.
pub fn run_artifacts(dir: &Path) -> Vec<PathBuf> {
    ["history.csv", "summary.json", "config.txt", "correlation.csv", "embeddings.csv", "assignments.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}
