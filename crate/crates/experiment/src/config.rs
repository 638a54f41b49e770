//! Declarative experiment configuration, read from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sosnn_core::markov::MarkovOrder;
use sosnn_core::neural::{AnnealingSchedule, NetworkConfig};
use sosnn_core::nnbp::NnbpConfig;
use sosnn_core::sosnn::SosnnConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sosnn: Option<SosnnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnbp: Option<NnbpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSection>,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Betting rounds per simulated series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Betting rounds at which the summary reports log capital.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
}

fn default_name() -> String {
    "run".into()
}
fn default_seed() -> u64 {
    1
}
fn default_replicates() -> usize {
    1
}
fn default_warmup() -> usize {
    20
}
fn default_checkpoints() -> Vec<usize> {
    vec![100, 200, 300]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSection {
    Ar1,
    Arma21,
    Prices {
        path: PathBuf,
        normalization: DateRange,
        investing: DateRange,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        training: Option<DateRange>,
    },
}

impl DataSection {
    pub fn label(&self) -> &'static str {
        match self {
            DataSection::Ar1 => "AR(1)",
            DataSection::Arma21 => "ARMA(2,1)",
            DataSection::Prices { .. } => "prices",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SosnnSection {
    pub lags: Vec<usize>,
    pub hidden: Vec<usize>,
    #[serde(default = "one")]
    pub beta0: f64,
    #[serde(default = "five")]
    pub tau: f64,
    #[serde(default = "weight_tolerance")]
    pub tolerance: f64,
    #[serde(default = "max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "init_scale")]
    pub init_scale: f64,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn one() -> f64 {
    1.0
}
fn five() -> f64 {
    5.0
}
fn weight_tolerance() -> f64 {
    1e-4
}
fn max_iterations() -> usize {
    10_000
}
fn init_scale() -> f64 {
    0.1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnbpSection {
    pub lags: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    #[serde(default = "error_threshold")]
    pub error_threshold: f64,
    #[serde(default = "max_steps")]
    pub max_steps: usize,
    #[serde(default = "init_scale")]
    pub init_scale: f64,
    /// Length of each simulated training series.
    #[serde(default = "training_length")]
    pub training_length: usize,
}

fn error_threshold() -> f64 {
    1e-2
}
fn max_steps() -> usize {
    600_000
}
fn training_length() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    pub orders: Vec<u8>,
}

/// Constant-ratio baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSection {
    pub ratio: f64,
}

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Data = 0,
    TrainingData = 1,
    NnbpInit = 2,
    SosnnInit = 3,
}

/// Independent seed per (replicate, purpose), derived from the run seed.
pub fn derive_seed(base: u64, replicate: usize, purpose: SeedPurpose) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((replicate as u64) << 8) | purpose as u64);
    rng.next_u64()
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Path of the price file, resolved against the config's directory.
    pub fn price_path(&self) -> Option<PathBuf> {
        match &self.data {
            DataSection::Prices { path, .. } => Some(self.base_dir.join(path)),
            _ => None,
        }
    }

    pub fn sosnn_config(&self, lags: usize, hidden: usize, seed: u64) -> Result<SosnnConfig, CliError> {
        let s = self.sosnn.as_ref().ok_or_else(|| CliError::Usage("no [sosnn] section".into()))?;
        let mut c = SosnnConfig::new(NetworkConfig::new(lags, hidden).map_err(usage)?, seed);
        c.schedule = AnnealingSchedule::new(s.beta0, s.tau).map_err(usage)?;
        c.weight_tolerance = s.tolerance;
        c.max_iterations = s.max_iterations;
        c.warmup = self.run.warmup;
        c.init_scale = s.init_scale;
        c.warm_start = s.warm_start;
        c.validate().map_err(usage)?;
        Ok(c)
    }

    pub fn nnbp_config(&self, seed: u64) -> Result<NnbpConfig, CliError> {
        let s = self.nnbp.as_ref().ok_or_else(|| CliError::Usage("no [nnbp] section".into()))?;
        let mut c = NnbpConfig::new(NetworkConfig::new(s.lags, s.hidden).map_err(usage)?, s.learning_rate, seed);
        c.error_threshold = s.error_threshold;
        c.max_steps = s.max_steps;
        c.init_scale = s.init_scale;
        c.validate().map_err(usage)?;
        Ok(c)
    }

    /// Checks everything that can be checked without touching data files.
    pub fn validate(&self) -> Result<(), CliError> {
        let run = &self.run;
        if run.replicates == 0 {
            return Err(CliError::Usage("run.replicates must be at least 1".into()));
        }
        if run.checkpoints.is_empty() {
            return Err(CliError::Usage("run.checkpoints must not be empty".into()));
        }
        if run.checkpoints[0] == 0 || run.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("run.checkpoints must be positive and strictly increasing".into()));
        }
        if self.sosnn.is_none() && self.nnbp.is_none() && self.markov.is_none() && self.epsilon.is_none() {
            return Err(CliError::Usage("no strategy selected".into()));
        }

        match &self.data {
            DataSection::Ar1 | DataSection::Arma21 => {
                let rounds = run
                    .rounds
                    .ok_or_else(|| CliError::Usage("run.rounds is required for simulated data".into()))?;
                let last = *run.checkpoints.last().unwrap();
                if last > rounds {
                    return Err(CliError::Usage(format!("checkpoint {last} exceeds run.rounds = {rounds}")));
                }
            }
            DataSection::Prices {
                normalization,
                investing,
                training,
                ..
            } => {
                for (name, range) in [("normalization", Some(normalization)), ("investing", Some(investing)), ("training", training.as_ref())] {
                    if let Some(r) = range {
                        if r.start > r.end {
                            return Err(CliError::Usage(format!("data.{name} starts after it ends")));
                        }
                    }
                }
                match training {
                    Some(t) if t.overlaps(investing) => {
                        return Err(CliError::Usage("data.training overlaps data.investing".into()));
                    }
                    None if self.nnbp.is_some() => {
                        return Err(CliError::Usage("NNBP needs a data.training range".into()));
                    }
                    _ => {}
                }
            }
        }

        if let Some(s) = &self.sosnn {
            if s.lags.is_empty() || s.hidden.is_empty() {
                return Err(CliError::Usage("sosnn.lags and sosnn.hidden must not be empty".into()));
            }
            for &l in &s.lags {
                if l > run.warmup {
                    return Err(CliError::Usage(format!("sosnn lag {l} exceeds run.warmup = {}", run.warmup)));
                }
                for &m in &s.hidden {
                    self.sosnn_config(l, m, 0)?;
                }
            }
        }
        if let Some(s) = &self.nnbp {
            if s.lags > run.warmup {
                return Err(CliError::Usage(format!("nnbp.lags {} exceeds run.warmup = {}", s.lags, run.warmup)));
            }
            if s.training_length <= s.lags {
                return Err(CliError::Usage("nnbp.training_length must exceed nnbp.lags".into()));
            }
            self.nnbp_config(0)?;
        }
        if let Some(m) = &self.markov {
            if m.orders.is_empty() {
                return Err(CliError::Usage("markov.orders must not be empty".into()));
            }
            for &o in &m.orders {
                let order = MarkovOrder::new(o).map_err(usage)?;
                if order.order() > run.warmup {
                    return Err(CliError::Usage(format!("{} needs a warmup of at least {o}", order.name())));
                }
            }
        }
        if let Some(e) = &self.epsilon {
            if !(e.ratio.is_finite() && e.ratio.abs() < 1.0) {
                return Err(CliError::Usage(format!("epsilon.ratio {} must lie in (-1, 1)", e.ratio)));
            }
        }
        Ok(())
    }
}

fn usage(e: sosnn_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}
