//! Run configuration and its flat `key = value` file format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::objectives::{EntropyMode, ObjectiveConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    TwoBit,
    LinearMixture,
    AcCmnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Held-out slice of the training domains.
    TrainDomain,
    /// The test domain itself (oracle selection).
    TestDomain,
}

macro_rules! names {
    ($t:ty { $($v:ident = $s:literal),* $(,)? }) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($s => Some(Self::$v),)* _ => None }
            }
        }
    };
}

names!(Dataset { TwoBit = "two_bit", LinearMixture = "linear_mixture", AcCmnist = "ac_cmnist" });
names!(OptimizerKind { Sgd = "sgd", Adam = "adam" });
names!(Selection { TrainDomain = "train_domain", TestDomain = "test_domain" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub objective: ObjectiveConfig,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Per-environment minibatch size; 0 trains full-batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub selection: Selection,
    pub val_fraction: f64,
    pub seed: u64,
    pub output_dir: PathBuf,

    /// Hidden widths; the last one is the representation width.
    pub hidden: Vec<usize>,
    /// Size of each training environment before the validation split.
    pub train_sizes: Vec<usize>,
    pub test_size: usize,
    pub label_noise: f64,
    /// Color flip (spurious-feature flip) rate of each training environment.
    pub train_color_flips: Vec<f64>,
    pub test_color_flip: f64,
    /// Seed for data generation and splitting; `seed` when unset.
    pub data_seed: Option<u64>,
    /// Epochs during which the IRM weight is capped at 1.
    pub penalty_anneal_epochs: usize,
    /// Epochs during which the entropy weight is 0.
    pub entropy_warmup_epochs: usize,
    /// Spatial decimation for colored MNIST (1 = none).
    pub downscale: usize,
    /// Directory with the MNIST IDX files; falls back to `CEIRM_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    /// Select the epoch with the best validation metric instead of the last one.
    pub track_validation: bool,
    /// Record wall-clock time (makes reports non-reproducible byte-for-byte).
    pub timing: bool,
    /// Concurrent grid runs; 0 uses every core.
    pub workers: usize,
}

impl RunConfig {
    pub fn defaults(dataset: Dataset) -> Self {
        let base = Self {
            dataset,
            objective: ObjectiveConfig::default(),
            optimizer: OptimizerKind::Adam,
            lr: 1e-2,
            batch_size: 0,
            epochs: 600,
            selection: Selection::TestDomain,
            val_fraction: 0.05,
            seed: 0,
            output_dir: PathBuf::from("runs"),
            hidden: vec![16, 16],
            train_sizes: vec![5000, 5000],
            test_size: 5000,
            label_noise: 0.25,
            train_color_flips: vec![0.1, 0.2],
            test_color_flip: 0.9,
            data_seed: None,
            penalty_anneal_epochs: 100,
            entropy_warmup_epochs: 400,
            downscale: 2,
            data_dir: None,
            track_validation: false,
            timing: false,
            workers: 0,
        };
        match dataset {
            Dataset::TwoBit | Dataset::LinearMixture => base,
            Dataset::AcCmnist => Self {
                lr: 1e-4,
                batch_size: 64,
                epochs: 50,
                hidden: vec![256, 256],
                train_sizes: vec![4000, 4000],
                test_size: 2000,
                penalty_anneal_epochs: 10,
                entropy_warmup_epochs: 10,
                ..base
            },
        }
    }

    /// The full-size colored MNIST setup: 25k + 25k training, 10k test, 500 epochs.
    pub fn apply_full_scale(&mut self) {
        self.train_sizes = vec![25_000, 25_000];
        self.test_size = 10_000;
        self.epochs = 500;
        self.lr = 1e-4;
        self.batch_size = 64;
        self.hidden = vec![256, 256];
        self.downscale = 2;
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths must be non-empty and positive, got {:?}", self.hidden));
        }
        if self.train_sizes.is_empty() || self.train_sizes.contains(&0) || self.test_size == 0 {
            return bad("environment sizes must be positive".into());
        }
        if self.train_sizes.len() != self.train_color_flips.len() {
            return bad(format!(
                "{} training sizes but {} color flips",
                self.train_sizes.len(),
                self.train_color_flips.len()
            ));
        }
        if self.downscale == 0 {
            return bad("downscale must be ≥ 1".into());
        }
        Ok(())
    }

    /// Parse the flat format: one `key = value` per line, `#` starts a comment.
    ///
    /// `dataset` picks the defaults and `full_scale = true` applies the full-size
    /// values before any other key, wherever they appear.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let dataset = match entries.iter().rev().find(|e| e.1 == "dataset") {
            Some((line, _, v)) => Dataset::parse(v)
                .ok_or_else(|| Error::Config { line: *line, msg: format!("unknown dataset {v:?}") })?,
            None => Dataset::TwoBit,
        };
        let mut cfg = Self::defaults(dataset);
        for (line, k, v) in &entries {
            if k == "full_scale" && parse_bool(*line, v)? {
                cfg.apply_full_scale();
            }
        }
        for (line, k, v) in &entries {
            if k != "dataset" && k != "full_scale" {
                cfg.set(*line, k, v)?;
            }
        }
        cfg.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text)
    }

    /// Set one field from its textual form.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let err = |msg: String| Error::Config { line, msg };
        let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: not a number: {v:?}")));
        let count = |v: &str| v.parse::<usize>().map_err(|_| err(format!("{key}: not a count: {v:?}")));
        let seed = |v: &str| v.parse::<u64>().map_err(|_| err(format!("{key}: not a seed: {v:?}")));
        let list = |v| split_list(v).ok_or_else(|| err(format!("{key}: empty list")));
        match key {
            "alpha" => self.objective.alpha = num(value)?,
            "beta" => self.objective.beta = num(value)?,
            "noise_std" => self.objective.noise_std = num(value)?,
            "entropy_mode" => {
                self.objective.entropy_mode =
                    EntropyMode::parse(value).ok_or_else(|| err(format!("unknown entropy_mode {value:?}")))?
            }
            "objective_seed" => self.objective.seed = seed(value)?,
            "optimizer" => {
                self.optimizer =
                    OptimizerKind::parse(value).ok_or_else(|| err(format!("unknown optimizer {value:?}")))?
            }
            "lr" => self.lr = num(value)?,
            "batch_size" => self.batch_size = count(value)?,
            "epochs" => self.epochs = count(value)?,
            "selection" => {
                self.selection = Selection::parse(value).ok_or_else(|| err(format!("unknown selection {value:?}")))?
            }
            "val_fraction" => self.val_fraction = num(value)?,
            "seed" => self.seed = seed(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "hidden" => self.hidden = list(value)?.into_iter().map(count).collect::<Result<_>>()?,
            "train_sizes" => self.train_sizes = list(value)?.into_iter().map(count).collect::<Result<_>>()?,
            "test_size" => self.test_size = count(value)?,
            "label_noise" => self.label_noise = num(value)?,
            "train_color_flips" => self.train_color_flips = list(value)?.into_iter().map(num).collect::<Result<_>>()?,
            "test_color_flip" => self.test_color_flip = num(value)?,
            "data_seed" => self.data_seed = Some(seed(value)?),
            "penalty_anneal_epochs" => self.penalty_anneal_epochs = count(value)?,
            "entropy_warmup_epochs" => self.entropy_warmup_epochs = count(value)?,
            "downscale" => self.downscale = count(value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "track_validation" => self.track_validation = parse_bool(line, value)?,
            "timing" => self.timing = parse_bool(line, value)?,
            "workers" => self.workers = count(value)?,
            "dataset" => {
                self.dataset = Dataset::parse(value).ok_or_else(|| err(format!("unknown dataset {value:?}")))?
            }
            "full_scale" => {
                if parse_bool(line, value)? {
                    self.apply_full_scale()
                }
            }
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Render in the format [`RunConfig::parse`] reads.
    pub fn to_kv(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let mut lines = vec![
            format!("dataset = {}", self.dataset.name()),
            format!("alpha = {}", self.objective.alpha),
            format!("beta = {}", self.objective.beta),
            format!("noise_std = {}", self.objective.noise_std),
            format!("entropy_mode = {}", self.objective.entropy_mode.name()),
            format!("objective_seed = {}", self.objective.seed),
            format!("optimizer = {}", self.optimizer.name()),
            format!("lr = {}", self.lr),
            format!("batch_size = {}", self.batch_size),
            format!("epochs = {}", self.epochs),
            format!("selection = {}", self.selection.name()),
            format!("val_fraction = {}", self.val_fraction),
            format!("seed = {}", self.seed),
            format!("output_dir = {}", self.output_dir.display()),
            format!("hidden = {}", join(self.hidden.iter().map(|h| h.to_string()).collect())),
            format!("train_sizes = {}", join(self.train_sizes.iter().map(|h| h.to_string()).collect())),
            format!("test_size = {}", self.test_size),
            format!("label_noise = {}", self.label_noise),
            format!("train_color_flips = {}", join(self.train_color_flips.iter().map(|h| h.to_string()).collect())),
            format!("test_color_flip = {}", self.test_color_flip),
            format!("penalty_anneal_epochs = {}", self.penalty_anneal_epochs),
            format!("entropy_warmup_epochs = {}", self.entropy_warmup_epochs),
            format!("downscale = {}", self.downscale),
            format!("track_validation = {}", self.track_validation),
            format!("timing = {}", self.timing),
            format!("workers = {}", self.workers),
        ];
        if let Some(s) = self.data_seed {
            lines.push(format!("data_seed = {s}"));
        }
        if let Some(d) = &self.data_dir {
            lines.push(format!("data_dir = {}", d.display()));
        }
        lines.join("\n") + "\n"
    }
}

fn split_list(v: &str) -> Option<Vec<&str>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    (!items.is_empty()).then_some(items)
}

fn parse_bool(line: usize, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config { line, msg: format!("expected a boolean, got {v:?}") }),
    }
}
