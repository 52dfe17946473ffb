//! Run configuration as plain `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys, repeated
//! keys and unparsable values are errors. [`RunConfig::to_text`] writes every
//! key in a fixed order; its output parses back to the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::augment::{AugmentationSpec, Transform};
use crate::error::{IdfdError, Result};
use crate::losses::LossMode;
use crate::train::{LrSchedule, TrainConfig};

/// Which representations are clustered at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterSource {
    /// Encode the clean samples with the current encoder.
    Fresh,
    /// Use the memory bank rows.
    Bank,
}

impl FromStr for ClusterSource {
    type Err = IdfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh" => Ok(Self::Fresh),
            "bank" => Ok(Self::Bank),
            _ => Err(IdfdError::Config(format!("cluster_on must be fresh or bank, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for ClusterSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fresh => "fresh",
            Self::Bank => "bank",
        })
    }
}

/// Synthetic sphere-mixture parameters, used when no data file is given.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub k: usize,
    pub n: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            k: 4,
            n: 400,
            dim: 32,
            separation: 0.0,
            noise: 0.35,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub mode: LossMode,
    /// Clusters; defaults to the number of distinct labels.
    pub clusters: Option<usize>,
    pub restarts: usize,
    pub augment: AugmentationSpec,
    pub out_dir: PathBuf,
    /// Evaluate every this many epochs (and after the last); 0 disables.
    pub eval_every: usize,
    /// Trailing evaluations averaged for the summary statistics.
    pub eval_window: usize,
    pub cluster_on: ClusterSource,
    /// Also run spectral clustering after the last epoch.
    pub spectral: bool,
    pub data: Option<PathBuf>,
    pub synthetic: SyntheticData,
    pub checkpoint: bool,
}

/// Every accepted key, in output order.
pub const KEYS: &[&str] = &[
    "seed",
    "mode",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "warm_epochs",
    "decay_every",
    "lr_decay",
    "tau",
    "tau2",
    "alpha",
    "bank_momentum",
    "hidden",
    "dim",
    "augment",
    "clusters",
    "restarts",
    "eval_every",
    "eval_window",
    "cluster_on",
    "spectral",
    "data",
    "data_k",
    "data_n",
    "data_dim",
    "separation",
    "noise",
    "data_seed",
    "checkpoint",
    "out_dir",
];

/// Keys that do not influence any output file's content.
const UNHASHED: &[&str] = &["out_dir"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| IdfdError::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(IdfdError::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// The desk-scale sphere-mixture benchmark.
    pub fn new(seed: u64) -> Self {
        Self {
            train: TrainConfig {
                lr0: 0.3,
                ..TrainConfig::new(seed)
            },
            mode: LossMode::Idfd,
            clusters: None,
            restarts: crate::kmeans::DEFAULT_RESTARTS,
            augment: AugmentationSpec::new(vec![Transform::GaussianNoise { sigma: 0.1 }])
                .expect("valid default"),
            out_dir: PathBuf::from("runs/default"),
            eval_every: 10,
            eval_window: 5,
            cluster_on: ClusterSource::Fresh,
            spectral: false,
            data: None,
            synthetic: SyntheticData::default(),
            checkpoint: false,
        }
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        match key {
            "seed" => t.seed = parse(key, value)?,
            "mode" => self.mode = value.parse().map_err(|e: IdfdError| IdfdError::Config(e.to_string()))?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.lr0 = parse(key, value)?,
            "momentum" => t.momentum_beta = parse(key, value)?,
            "warm_epochs" => t.schedule.warm_epochs = parse(key, value)?,
            "decay_every" => t.schedule.decay_every = parse(key, value)?,
            "lr_decay" => t.schedule.factor = parse(key, value)?,
            "tau" => t.tau = parse(key, value)?,
            "tau2" => t.tau2 = parse(key, value)?,
            "alpha" => t.alpha = parse(key, value)?,
            "bank_momentum" => t.bank_momentum = parse(key, value)?,
            "hidden" => {
                t.hidden = if value.is_empty() || value == "none" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| parse(key, w.trim()))
                        .collect::<Result<Vec<usize>>>()?
                }
            }
            "dim" => t.dim = parse(key, value)?,
            "augment" => self.augment = value.parse()?,
            "clusters" => self.clusters = optional(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "eval_window" => self.eval_window = parse(key, value)?,
            "cluster_on" => self.cluster_on = value.parse()?,
            "spectral" => self.spectral = parse_bool(key, value)?,
            "data" => {
                self.data = if value.is_empty() || value == "synthetic" {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "data_k" => self.synthetic.k = parse(key, value)?,
            "data_n" => self.synthetic.n = parse(key, value)?,
            "data_dim" => self.synthetic.dim = parse(key, value)?,
            "separation" => self.synthetic.separation = parse(key, value)?,
            "noise" => self.synthetic.noise = parse(key, value)?,
            "data_seed" => self.synthetic.seed = optional(key, value)?,
            "checkpoint" => self.checkpoint = parse_bool(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(IdfdError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Value of `key` in its text form.
    pub fn get(&self, key: &str) -> Result<String> {
        let t = &self.train;
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        Ok(match key {
            "seed" => t.seed.to_string(),
            "mode" => self.mode.to_string(),
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "lr" => format!("{:?}", t.lr0),
            "momentum" => format!("{:?}", t.momentum_beta),
            "warm_epochs" => t.schedule.warm_epochs.to_string(),
            "decay_every" => t.schedule.decay_every.to_string(),
            "lr_decay" => format!("{:?}", t.schedule.factor),
            "tau" => format!("{:?}", t.tau),
            "tau2" => format!("{:?}", t.tau2),
            "alpha" => format!("{:?}", t.alpha),
            "bank_momentum" => format!("{:?}", t.bank_momentum),
            "hidden" => {
                if t.hidden.is_empty() {
                    "none".into()
                } else {
                    t.hidden.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                }
            }
            "dim" => t.dim.to_string(),
            "augment" => self.augment.to_string(),
            "clusters" => auto(self.clusters.map(|c| c.to_string())),
            "restarts" => self.restarts.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "eval_window" => self.eval_window.to_string(),
            "cluster_on" => self.cluster_on.to_string(),
            "spectral" => self.spectral.to_string(),
            "data" => self
                .data
                .as_ref()
                .map_or_else(|| "synthetic".into(), |p| p.display().to_string()),
            "data_k" => self.synthetic.k.to_string(),
            "data_n" => self.synthetic.n.to_string(),
            "data_dim" => self.synthetic.dim.to_string(),
            "separation" => format!("{:?}", self.synthetic.separation),
            "noise" => format!("{:?}", self.synthetic.noise),
            "data_seed" => auto(self.synthetic.seed.map(|s| s.to_string())),
            "checkpoint" => self.checkpoint.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            other => return Err(IdfdError::Config(format!("unknown key {other:?}"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.restarts == 0 {
            return Err(IdfdError::Config("restarts must be >= 1".into()));
        }
        if self.clusters == Some(0) {
            return Err(IdfdError::Config("clusters must be >= 1".into()));
        }
        if self.eval_window == 0 {
            return Err(IdfdError::Config("eval_window must be >= 1".into()));
        }
        let s = &self.synthetic;
        if self.data.is_none() && (s.k == 0 || s.dim == 0 || s.n < s.k) {
            return Err(IdfdError::Config("synthetic data needs data_k >= 1, data_dim >= 1, data_n >= data_k".into()));
        }
        if !(s.separation >= 0.0 && s.noise >= 0.0) {
            return Err(IdfdError::Config("separation and noise must be >= 0".into()));
        }
        Ok(())
    }

    /// Defaults overridden by the assignments in `text`.
    pub fn from_text(text: &str, seed: u64) -> Result<Self> {
        let mut cfg = Self::new(seed);
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| IdfdError::Config(format!("line {}: expected key = value", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(IdfdError::Config(format!("line {}: {key} given twice", no + 1)));
            }
            self.set(key, value).map_err(|e| match e {
                IdfdError::Config(msg) => IdfdError::Config(format!("line {}: {msg}", no + 1)),
                other => IdfdError::Config(format!("line {}: {other}", no + 1)),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IdfdError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, seed)
    }

    /// All keys, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    /// SHA-256 of the resolved configuration, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for key in KEYS.iter().filter(|k| !UNHASHED.contains(k)) {
            h.update(format!("{key}={}\n", self.get(key).expect("listed key")));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn schedule(&self) -> LrSchedule {
        self.train.schedule
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }
}
