//! Experiment configuration: a TOML file whose top-level keys name the task,
//! stream lengths, sweep axes, and seeds, with nested sections for signal,
//! topology, training, and explorative-search parameters. Unknown keys are
//! rejected so typos fail loudly instead of silently running defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::explorative::ExplorativeConfig;
use crate::signals::BitSequence;
use crate::training::TrainConfig;

/// Which target the readout is trained to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Recognize occurrences of a fixed header pattern in the bit stream.
    Header,
    /// XOR of the current bit with the bit `xor_delay` positions earlier.
    Xor,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Header => "header",
            Task::Xor => "xor",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "header" => Ok(Task::Header),
            "xor" => Ok(Task::Xor),
            other => Err(Error::invalid_argument(format!("unknown task {other:?}"))),
        }
    }
}

/// Accept either a scalar or a list for sweep-axis keys.
fn one_or_many<'de, D, T>(deserializer: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: DeserializeOwned,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(deserializer)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn one_or_many_opt<'de, D, T>(deserializer: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: DeserializeOwned,
{
    one_or_many(deserializer).map(Some)
}

/// Input signal parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub samples_per_bit: usize,
    /// One-pole smoothing coefficient of the modulator, in [0, 1).
    pub alpha: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            samples_per_bit: 20,
            alpha: 0.1,
        }
    }
}

/// Reservoir construction parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub rows: usize,
    pub cols: usize,
    pub delay_samples: usize,
    pub waveguide_loss: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            delay_samples: 10,
            waveguide_loss: 0.1,
        }
    }
}

/// Readout training parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on amplitudes; omit to grid-search
    /// {1e-6, 1e-5, 1e-4, 1e-3, 1e-2} on validation BER once per run.
    pub l2_lambda: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 2000,
            l2_lambda: None,
        }
    }
}

/// Explorative-search parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorativeSection {
    pub initial_fixed_ratio: f64,
    pub n_partitions: usize,
    pub n_iterations: usize,
    pub ratio_growth: f64,
    /// Adam epochs per candidate retraining; omit to reuse `training.epochs`.
    /// Candidates start warm from the incumbent, so far fewer epochs suffice.
    pub retrain_epochs: Option<usize>,
}

impl Default for ExplorativeSection {
    fn default() -> Self {
        Self {
            initial_fixed_ratio: 0.5,
            n_partitions: 20,
            n_iterations: 4,
            ratio_growth: 2.0,
            retrain_epochs: None,
        }
    }
}

/// Full experiment description. Every field has a default, so the empty
/// string is a valid (header-task) configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub header_pattern: String,
    pub xor_delay: usize,
    pub n_train_bits: usize,
    pub n_val_bits: usize,
    pub n_test_bits: usize,
    /// Amplitude level counts N_a (sweep axis; scalar or list).
    #[serde(deserialize_with = "one_or_many")]
    pub amp_levels: Vec<usize>,
    /// Phase level counts N_phi, paired entry-wise with `amp_levels`; omit to
    /// reuse the amplitude level counts.
    #[serde(deserialize_with = "one_or_many_opt")]
    pub phase_levels: Option<Vec<usize>>,
    /// Extinction ratios E (sweep axis; scalar or list).
    #[serde(deserialize_with = "one_or_many")]
    pub extinction_ratio: Vec<f64>,
    /// Drift noise levels eta (sweep axis; scalar or list).
    #[serde(deserialize_with = "one_or_many")]
    pub noise_level: Vec<f64>,
    /// Monte Carlo draws per (cell, method, noise level).
    pub mc_draws: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub seeds: Vec<u64>,
    pub signal: SignalSection,
    pub topology: TopologySection,
    pub training: TrainingSection,
    pub explorative: ExplorativeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Header,
            header_pattern: "1101".to_string(),
            xor_delay: 4,
            n_train_bits: 6000,
            n_val_bits: 2000,
            n_test_bits: 2000,
            amp_levels: vec![8, 16, 32],
            phase_levels: None,
            extinction_ratio: vec![2.0, 5.0, 10.0],
            noise_level: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
            mc_draws: 200,
            seeds: vec![1, 2, 3, 4, 5],
            signal: SignalSection::default(),
            topology: TopologySection::default(),
            training: TrainingSection::default(),
            explorative: ExplorativeSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(s)
            .map_err(|e| Error::invalid_config(format!("config parse failed: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_train_bits", self.n_train_bits),
            ("n_val_bits", self.n_val_bits),
            ("n_test_bits", self.n_test_bits),
            ("mc_draws", self.mc_draws),
            ("xor_delay", self.xor_delay),
        ] {
            if v == 0 {
                return Err(Error::invalid_config(format!("{name} must be >= 1")));
            }
        }
        BitSequence::parse(&self.header_pattern)
            .map_err(|e| Error::invalid_config(format!("header_pattern: {e}")))?;
        if self.amp_levels.is_empty() {
            return Err(Error::invalid_config("amp_levels must be non-empty"));
        }
        if self.amp_levels.iter().any(|&n| n < 2) {
            return Err(Error::invalid_config("every amp_levels entry must be >= 2"));
        }
        if let Some(pl) = &self.phase_levels {
            if pl.len() != self.amp_levels.len() {
                return Err(Error::invalid_config(format!(
                    "phase_levels has {} entries but amp_levels has {}; they pair entry-wise",
                    pl.len(),
                    self.amp_levels.len()
                )));
            }
            if pl.iter().any(|&n| n < 1) {
                return Err(Error::invalid_config(
                    "every phase_levels entry must be >= 1",
                ));
            }
        }
        if self.extinction_ratio.is_empty() {
            return Err(Error::invalid_config("extinction_ratio must be non-empty"));
        }
        if self
            .extinction_ratio
            .iter()
            .any(|&e| e <= 1.0 || !e.is_finite())
        {
            return Err(Error::invalid_config(
                "every extinction_ratio entry must be finite and > 1",
            ));
        }
        if self.noise_level.is_empty() {
            return Err(Error::invalid_config("noise_level must be non-empty"));
        }
        if self.noise_level.iter().any(|&n| n < 0.0 || !n.is_finite()) {
            return Err(Error::invalid_config(
                "every noise_level entry must be finite and >= 0",
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid_config("seeds must be non-empty"));
        }
        if self.signal.samples_per_bit == 0 {
            return Err(Error::invalid_config("signal.samples_per_bit must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.signal.alpha) {
            return Err(Error::invalid_config("signal.alpha must lie in [0, 1)"));
        }
        if self.topology.rows < 2 || self.topology.cols < 2 {
            return Err(Error::invalid_config("topology grid must be at least 2x2"));
        }
        if self.topology.delay_samples == 0 {
            return Err(Error::invalid_config("topology.delay_samples must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.topology.waveguide_loss) {
            return Err(Error::invalid_config(
                "topology.waveguide_loss must lie in [0, 1)",
            ));
        }
        if self.training.learning_rate <= 0.0 || !self.training.learning_rate.is_finite() {
            return Err(Error::invalid_config("training.learning_rate must be > 0"));
        }
        if let Some(l) = self.training.l2_lambda {
            if l < 0.0 || !l.is_finite() {
                return Err(Error::invalid_config("training.l2_lambda must be >= 0"));
            }
        }
        self.explorative_config(0)
            .validate()
            .map_err(|e| Error::invalid_config(format!("explorative: {e}")))?;
        Ok(())
    }

    /// The quantization cells: (N_a, N_phi) pairs.
    pub fn level_pairs(&self) -> Vec<(usize, usize)> {
        match &self.phase_levels {
            Some(pl) => self
                .amp_levels
                .iter()
                .copied()
                .zip(pl.iter().copied())
                .collect(),
            None => self.amp_levels.iter().map(|&n| (n, n)).collect(),
        }
    }

    /// Baseline training configuration for one run seed.
    pub fn train_config(&self, seed: u64, l2_lambda: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            epochs: self.training.epochs,
            l2_lambda,
            seed,
            ..TrainConfig::default()
        }
    }

    /// Per-candidate retraining configuration (warm-started, so usually far
    /// fewer epochs than the baseline).
    pub fn retrain_config(&self, seed: u64, l2_lambda: f64) -> TrainConfig {
        TrainConfig {
            epochs: self
                .explorative
                .retrain_epochs
                .unwrap_or(self.training.epochs),
            ..self.train_config(seed, l2_lambda)
        }
    }

    pub fn explorative_config(&self, seed: u64) -> ExplorativeConfig {
        ExplorativeConfig {
            initial_fixed_ratio: self.explorative.initial_fixed_ratio,
            n_partitions: self.explorative.n_partitions,
            n_iterations: self.explorative.n_iterations,
            ratio_growth: self.explorative.ratio_growth,
            seed,
        }
    }

    pub fn header_pattern_bits(&self) -> Result<BitSequence> {
        BitSequence::parse(&self.header_pattern)
    }
}
