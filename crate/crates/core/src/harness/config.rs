//! Experiment configuration and its `key = value` text form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gradnorm::{DEFAULT_ALPHA, DEFAULT_WEIGHT_LR};
use crate::metrics::F1Pooling;
use crate::recnet::{Direction, HeadKind, ModelConfig, SharedSubset};

use super::synth::SyntheticGrammar;

/// Model family: `A` recognizes actions only, `P*` estimate progress only,
/// `AP*` do both. The suffix picks the progress head: `r` regression,
/// `c` classification, `oc` ordinal classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    A,
    APr,
    APc,
    APoc,
    Pr,
    Pc,
    Poc,
}

impl Architecture {
    pub const ALL: [Architecture; 7] = [
        Architecture::A,
        Architecture::APr,
        Architecture::APc,
        Architecture::APoc,
        Architecture::Pr,
        Architecture::Pc,
        Architecture::Poc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::A => "A",
            Architecture::APr => "APr",
            Architecture::APc => "APc",
            Architecture::APoc => "APoc",
            Architecture::Pr => "Pr",
            Architecture::Pc => "Pc",
            Architecture::Poc => "Poc",
        }
    }

    pub fn action_head(self) -> bool {
        matches!(self, Architecture::A | Architecture::APr | Architecture::APc | Architecture::APoc)
    }

    pub fn progress_head(self) -> HeadKind {
        match self {
            Architecture::A => HeadKind::NoneSingleTask,
            Architecture::APr | Architecture::Pr => HeadKind::Regression,
            Architecture::APc | Architecture::Pc => HeadKind::Classification,
            Architecture::APoc | Architecture::Poc => HeadKind::OrdinalClassification,
        }
    }

    pub fn is_multi_task(self) -> bool {
        self.action_head() && self.progress_head() != HeadKind::NoneSingleTask
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Balancing {
    Fixed { w1: f64, w2: f64 },
    GradNorm { alpha: f64, weight_lr: f64, subset: SharedSubset },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Gd,
    Momentum { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Standardize each trial on its own.
    PerTrial,
    /// Standardize with statistics of the training fold.
    TrainingFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    /// Raw JIGSAWS suturing directory. `None` falls back to the
    /// `SUTURENET_DATA` environment variable.
    Jigsaws { path: Option<PathBuf> },
    /// Directory of preprocessed demonstration files.
    Prepared { path: PathBuf },
    Synthetic {
        grammar: SyntheticGrammar,
        subjects: usize,
        trials: usize,
        seed: u64,
    },
}

/// Environment variable naming the JIGSAWS suturing root.
pub const DATA_ENV: &str = "SUTURENET_DATA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub direction: Direction,
    pub hidden: usize,
    pub balancing: Balancing,
    pub optimizer: Optimizer,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    /// Last iteration run at the initial rate.
    pub lr_decay_at: usize,
    pub max_iterations: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub clip_threshold: f64,
    pub seeds: Vec<u64>,
    pub test_iterations: Vec<usize>,
    pub data: DataSource,
    pub normalization: Normalization,
    pub f1_pooling: F1Pooling,
}

impl ExperimentConfig {
    /// Published full-scale schedule for an architecture.
    pub fn paper(architecture: Architecture) -> Self {
        let (optimizer, initial_lr) = match architecture.progress_head() {
            HeadKind::Regression => (Optimizer::Momentum { mu: 0.9 }, 0.1),
            _ => (Optimizer::Gd, 1.0),
        };
        let balancing = if architecture.is_multi_task() {
            Balancing::GradNorm {
                alpha: DEFAULT_ALPHA,
                weight_lr: DEFAULT_WEIGHT_LR,
                subset: SharedSubset::LastShared,
            }
        } else {
            Balancing::Fixed { w1: 1.0, w2: 1.0 }
        };
        ExperimentConfig {
            architecture,
            direction: Direction::Bidirectional,
            hidden: 1024,
            balancing,
            optimizer,
            initial_lr,
            lr_decay_factor: 0.5,
            lr_decay_at: 80,
            max_iterations: 120,
            batch_size: 5,
            dropout_rate: 0.5,
            clip_threshold: 1.0,
            seeds: vec![1, 2, 3],
            test_iterations: vec![100, 110, 120],
            data: DataSource::Jigsaws { path: None },
            normalization: Normalization::PerTrial,
            f1_pooling: F1Pooling::PerDemonstration,
        }
    }

    /// Desk-scale variant on the synthetic corpus with the full schedule.
    pub fn desk(architecture: Architecture) -> Self {
        ExperimentConfig {
            hidden: 64,
            data: DataSource::Synthetic {
                grammar: SyntheticGrammar::default(),
                subjects: 8,
                trials: 16,
                seed: 2024,
            },
            ..Self::paper(architecture)
        }
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: self.hidden,
            direction: self.direction,
            action_head: self.architecture.action_head(),
            progress_head: self.architecture.progress_head(),
        }
    }

    /// Learning rate in effect during a 1-based iteration.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        if iteration > self.lr_decay_at {
            self.initial_lr * self.lr_decay_factor
        } else {
            self.initial_lr
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hidden == 0 || self.batch_size == 0 || self.max_iterations == 0 {
            return fail("hidden size, batch size and iteration count must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.initial_lr > 0.0 && self.lr_decay_factor > 0.0 && self.clip_threshold > 0.0) {
            return fail("learning rate, decay factor and clip threshold must be positive".into());
        }
        if let Optimizer::Momentum { mu } = self.optimizer {
            if !(0.0..1.0).contains(&mu) {
                return fail(format!("momentum {mu} outside [0, 1)"));
            }
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.test_iterations.is_empty() || self.test_iterations.iter().any(|t| *t == 0 || *t > self.max_iterations) {
            return fail(format!("test iterations {:?} must lie in 1..={}", self.test_iterations, self.max_iterations));
        }
        match self.balancing {
            Balancing::GradNorm { .. } if !self.architecture.is_multi_task() => {
                fail(format!("{} is single-task and cannot use loss balancing", self.architecture.name()))
            }
            Balancing::Fixed { w1, w2 } if !self.architecture.is_multi_task() && (w1 != 1.0 || w2 != 1.0) => {
                fail(format!("{} is single-task; task weights must stay 1", self.architecture.name()))
            }
            Balancing::Fixed { w1, w2 } if !(w1 > 0.0 && w2 > 0.0) => fail("task weights must be positive".into()),
            Balancing::GradNorm { alpha, weight_lr, .. } if alpha < 0.0 || weight_lr < 0.0 => {
                fail("alpha and weight learning rate must be non-negative".into())
            }
            _ => Ok(()),
        }
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value {value:?} for {key}"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        let list = || -> Result<Vec<u64>> {
            value.split(',').map(|v| v.trim().parse::<u64>().map_err(|_| bad())).collect()
        };
        match key {
            "architecture" => {
                self.architecture = value.parse()?;
                if !self.architecture.is_multi_task() {
                    self.balancing = Balancing::Fixed { w1: 1.0, w2: 1.0 };
                }
            }
            "direction" => {
                self.direction = match value {
                    "bi" | "bidirectional" => Direction::Bidirectional,
                    "forward" | "online" => Direction::Forward,
                    _ => return Err(bad()),
                }
            }
            "hidden" => self.hidden = int()?,
            "balancing" => {
                self.balancing = match value {
                    "fixed" => Balancing::Fixed { w1: 1.0, w2: 1.0 },
                    "gradnorm" => Balancing::GradNorm {
                        alpha: DEFAULT_ALPHA,
                        weight_lr: DEFAULT_WEIGHT_LR,
                        subset: SharedSubset::LastShared,
                    },
                    _ => return Err(bad()),
                }
            }
            "w1" | "w2" => match &mut self.balancing {
                Balancing::Fixed { w1, w2 } => *(if key == "w1" { w1 } else { w2 }) = float()?,
                Balancing::GradNorm { .. } => return Err(Error::Config(format!("{key} needs balancing = fixed"))),
            },
            "alpha" | "weight_lr" | "shared_subset" => match &mut self.balancing {
                Balancing::GradNorm { alpha, weight_lr, subset } => match key {
                    "alpha" => *alpha = float()?,
                    "weight_lr" => *weight_lr = float()?,
                    _ => {
                        *subset = match value {
                            "last" => SharedSubset::LastShared,
                            "all" => SharedSubset::AllShared,
                            _ => return Err(bad()),
                        }
                    }
                },
                Balancing::Fixed { .. } => return Err(Error::Config(format!("{key} needs balancing = gradnorm"))),
            },
            "optimizer" => {
                self.optimizer = match value {
                    "gd" => Optimizer::Gd,
                    "momentum" => Optimizer::Momentum { mu: 0.9 },
                    _ => return Err(bad()),
                }
            }
            "momentum" => self.optimizer = Optimizer::Momentum { mu: float()? },
            "initial_lr" => self.initial_lr = float()?,
            "lr_decay_factor" => self.lr_decay_factor = float()?,
            "lr_decay_at" => self.lr_decay_at = int()?,
            "max_iterations" => self.max_iterations = int()?,
            "batch_size" => self.batch_size = int()?,
            "dropout_rate" => self.dropout_rate = float()?,
            "clip_threshold" => self.clip_threshold = float()?,
            "seeds" => self.seeds = list()?,
            "test_iterations" => self.test_iterations = list()?.into_iter().map(|v| v as usize).collect(),
            "normalization" => {
                self.normalization = match value {
                    "per_trial" => Normalization::PerTrial,
                    "training_fold" => Normalization::TrainingFold,
                    _ => return Err(bad()),
                }
            }
            "f1_pooling" => {
                self.f1_pooling = match value {
                    "per_demonstration" => F1Pooling::PerDemonstration,
                    "pooled" => F1Pooling::Pooled,
                    _ => return Err(bad()),
                }
            }
            "data" => {
                self.data = match value {
                    "jigsaws" => DataSource::Jigsaws { path: None },
                    "synthetic" => DataSource::Synthetic {
                        grammar: SyntheticGrammar::default(),
                        subjects: 8,
                        trials: 16,
                        seed: 2024,
                    },
                    _ => return Err(bad()),
                }
            }
            "data_path" => {
                self.data = match &self.data {
                    DataSource::Prepared { .. } => DataSource::Prepared { path: value.into() },
                    _ => DataSource::Jigsaws {
                        path: Some(value.into()),
                    },
                }
            }
            "prepared_path" => self.data = DataSource::Prepared { path: value.into() },
            "synth_subjects" | "synth_trials" | "synth_seed" | "synth_cycles" | "synth_noise" => match &mut self.data {
                DataSource::Synthetic {
                    grammar,
                    subjects,
                    trials,
                    seed,
                } => match key {
                    "synth_subjects" => *subjects = int()?,
                    "synth_trials" => *trials = int()?,
                    "synth_seed" => *seed = value.parse().map_err(|_| bad())?,
                    "synth_cycles" => grammar.cycles = int()?,
                    _ => grammar.noise = float()?,
                },
                _ => return Err(Error::Config(format!("{key} needs data = synthetic"))),
            },
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Reads a configuration file. The last `architecture` line picks the
    /// published defaults that the remaining keys refine.
    pub fn from_text(text: &str) -> Result<Self> {
        let arch = text
            .lines()
            .filter_map(|l| l.split('#').next())
            .filter_map(|l| l.split_once('='))
            .filter(|(k, _)| k.trim() == "architecture")
            .last()
            .map(|(_, v)| v.trim().parse::<Architecture>())
            .transpose()?
            .unwrap_or(Architecture::APc);
        let mut config = Self::paper(arch);
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Canonical `key = value` text; `from_text` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("architecture", self.architecture.name().into());
        kv(
            "direction",
            match self.direction {
                Direction::Bidirectional => "bi".into(),
                Direction::Forward => "forward".into(),
            },
        );
        kv("hidden", self.hidden.to_string());
        match self.balancing {
            Balancing::Fixed { w1, w2 } => {
                kv("balancing", "fixed".into());
                kv("w1", w1.to_string());
                kv("w2", w2.to_string());
            }
            Balancing::GradNorm { alpha, weight_lr, subset } => {
                kv("balancing", "gradnorm".into());
                kv("alpha", alpha.to_string());
                kv("weight_lr", weight_lr.to_string());
                kv(
                    "shared_subset",
                    match subset {
                        SharedSubset::LastShared => "last".into(),
                        SharedSubset::AllShared => "all".into(),
                    },
                );
            }
        }
        match self.optimizer {
            Optimizer::Gd => kv("optimizer", "gd".into()),
            Optimizer::Momentum { mu } => kv("momentum", mu.to_string()),
        }
        kv("initial_lr", self.initial_lr.to_string());
        kv("lr_decay_factor", self.lr_decay_factor.to_string());
        kv("lr_decay_at", self.lr_decay_at.to_string());
        kv("max_iterations", self.max_iterations.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("dropout_rate", self.dropout_rate.to_string());
        kv("clip_threshold", self.clip_threshold.to_string());
        kv("seeds", join(&self.seeds));
        kv("test_iterations", join(&self.test_iterations));
        kv(
            "normalization",
            match self.normalization {
                Normalization::PerTrial => "per_trial".into(),
                Normalization::TrainingFold => "training_fold".into(),
            },
        );
        kv(
            "f1_pooling",
            match self.f1_pooling {
                F1Pooling::PerDemonstration => "per_demonstration".into(),
                F1Pooling::Pooled => "pooled".into(),
            },
        );
        match &self.data {
            DataSource::Jigsaws { path } => {
                kv("data", "jigsaws".into());
                if let Some(p) = path {
                    kv("data_path", p.display().to_string());
                }
            }
            DataSource::Prepared { path } => kv("prepared_path", path.display().to_string()),
            DataSource::Synthetic {
                grammar,
                subjects,
                trials,
                seed,
            } => {
                kv("data", "synthetic".into());
                kv("synth_subjects", subjects.to_string());
                kv("synth_trials", trials.to_string());
                kv("synth_seed", seed.to_string());
                kv("synth_cycles", grammar.cycles.to_string());
                kv("synth_noise", grammar.noise.to_string());
            }
        }
        s
    }

    /// Short hash of everything except the seed list.
    pub fn hash(&self) -> String {
        let canonical = Self {
            seeds: Vec::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_text().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Output directory of one seed: `<root>/<name>-<hash>-seed<seed>`.
    pub fn run_dir(&self, root: &Path, seed: u64) -> PathBuf {
        root.join(format!("{}-{}-seed{seed}", self.architecture.name(), self.hash()))
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
