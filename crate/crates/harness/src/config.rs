//! Versioned TOML experiment configuration.
//!
//! Every default lives here and is mirrored in `configs/reference.toml`; a
//! test keeps the two in sync.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikebmi_core::learning::{AgrelLearner, BanditronLearner, LearnerKind, OnlineRule, PretrainConfig};
use spikebmi_core::ops::{EnvConfig, OpsParams, PerturbationKind, PerturbationSpec};
use spikebmi_core::sim::RateSchedule;
use spikebmi_core::snn::NetworkConfig;

use crate::error::{HarnessError, Result};
use crate::report::ReportConfig;
use crate::synth::SynthConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pretrain,
    OpenLoop,
    #[default]
    ClosedLoop,
    Sweep,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Banditron exploration probability.
    pub epsilon: f64,
    /// Banditron step multiplier for closed-loop evaluation trials.
    pub banditron_rate: f64,
    /// AGREL learning rate for closed-loop evaluation trials.
    pub agrel_alpha: f64,
    /// Rate decay during the second closed-loop training stage.
    pub stage2: RateSchedule,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { kind: LearnerKind::Banditron, epsilon: 0.1, banditron_rate: 0.005, agrel_alpha: 0.01, stage2: RateSchedule::default() }
    }
}

impl LearnerConfig {
    /// Builds the rule for `kind`; the Banditron draws from `seed`.
    pub fn rule(&self, kind: LearnerKind, n_classes: usize, seed: u64) -> Result<OnlineRule> {
        Ok(match kind {
            LearnerKind::None => OnlineRule::Fixed,
            LearnerKind::Banditron => OnlineRule::Banditron(BanditronLearner::new(self.epsilon, n_classes, seed)?),
            LearnerKind::Agrel => OnlineRule::Agrel(AgrelLearner::new(self.agrel_alpha)?),
        })
    }

    /// Closed-loop evaluation rate for `kind`.
    pub fn online_rate(&self, kind: LearnerKind) -> f64 {
        match kind {
            LearnerKind::None => 0.0,
            LearnerKind::Banditron => self.banditron_rate,
            LearnerKind::Agrel => self.agrel_alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(HarnessError::config("learner.epsilon must lie in [0, 1]"));
        }
        if !(self.banditron_rate >= 0.0) || !(self.agrel_alpha > 0.0) {
            return Err(HarnessError::config("learner rates must be non-negative (agrel_alpha > 0)"));
        }
        let s = &self.stage2;
        if !(s.start >= 0.0 && s.end >= 0.0) {
            return Err(HarnessError::config("stage2 rates must be non-negative"));
        }
        Ok(())
    }
}

/// First closed-loop training stage: supervised pretraining on trials
/// driven by an ideal decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub demonstration_trials: usize,
    /// Per-bin probability of replacing the driven class by a random one.
    pub jitter: f64,
    pub pretrain: PretrainConfig,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            demonstration_trials: 200,
            jitter: 0.0,
            pretrain: PretrainConfig { batch_size: 64, ..PretrainConfig::closed_loop_stage1() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpenLoopConfig {
    pub network: NetworkConfig,
    pub pretrain: PretrainConfig,
    pub synth: SynthConfig,
    pub n_sessions: usize,
    pub drift_strength: f64,
    /// Leading fraction of the first session used for training.
    pub train_fraction: f64,
    /// Bins per pretraining sequence (state is reset at each start).
    pub sequence_bins: usize,
    pub n_classes: usize,
    pub banditron_rate: f64,
    pub agrel_alpha: f64,
}

impl Default for OpenLoopConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::open_loop(),
            pretrain: PretrainConfig::open_loop(),
            synth: SynthConfig::default(),
            n_sessions: 5,
            drift_strength: 1.0,
            train_fraction: 0.8,
            sequence_bins: 250,
            n_classes: 4,
            banditron_rate: 1.0,
            agrel_alpha: 1e-4,
        }
    }
}

impl OpenLoopConfig {
    pub fn online_rate(&self, kind: LearnerKind) -> f64 {
        match kind {
            LearnerKind::None => 0.0,
            LearnerKind::Banditron => self.banditron_rate,
            LearnerKind::Agrel => self.agrel_alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.pretrain.validate()?;
        self.synth.validate()?;
        if self.n_sessions == 0 {
            return Err(HarnessError::config("open_loop.n_sessions must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(HarnessError::config("open_loop.train_fraction must lie in (0, 1]"));
        }
        if self.sequence_bins == 0 || self.n_classes < 2 {
            return Err(HarnessError::config("open_loop.sequence_bins >= 1 and n_classes >= 2 required"));
        }
        if self.network.layer_sizes.last() != Some(&(2 * self.n_classes)) {
            return Err(HarnessError::config("open-loop output layer must have 2 * n_classes units"));
        }
        if !(self.drift_strength >= 0.0) || !(self.banditron_rate >= 0.0) || !(self.agrel_alpha > 0.0) {
            return Err(HarnessError::config("open-loop drift strength and rates must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kinds: Vec<PerturbationKind>,
    pub ratios: Vec<f64>,
    pub learners: Vec<LearnerKind>,
    /// Trial window averaged per cell, `[start, end)`.
    pub window: [usize; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: PerturbationKind::ALL.to_vec(),
            ratios: vec![0.0, 0.3, 0.6, 0.9],
            learners: LearnerKind::ALL.to_vec(),
            window: [75, 100],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// SPKD dataset; open-loop runs synthesise one when absent.
    pub dataset: Option<PathBuf>,
    /// Weight container; pretraining runs in-process when absent.
    pub checkpoint: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { dataset: None, checkpoint: None, output: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    /// Evaluation trials per seed.
    pub trials: usize,
    /// Keep per-step trajectories in closed-loop output.
    pub trajectories: bool,
    pub network: NetworkConfig,
    pub learner: LearnerConfig,
    pub stage1: Stage1Config,
    pub ops: OpsParams,
    pub env: EnvConfig,
    pub perturbation: PerturbationSpec,
    pub sweep: SweepConfig,
    pub open_loop: OpenLoopConfig,
    pub report: ReportConfig,
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            mode: Mode::ClosedLoop,
            seeds: (0..10).collect(),
            trials: 100,
            trajectories: false,
            network: NetworkConfig::closed_loop(),
            learner: LearnerConfig::default(),
            stage1: Stage1Config::default(),
            ops: OpsParams::default(),
            env: EnvConfig::default(),
            perturbation: PerturbationSpec::new(PerturbationKind::LossOfNeurons, 30.0 / 46.0, 50, 7),
            sweep: SweepConfig::default(),
            open_loop: OpenLoopConfig::default(),
            report: ReportConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(HarnessError::config(format!(
                "config version {} not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.network.validate()?;
        self.env.validate()?;
        self.ops.validate()?;
        self.learner.validate()?;
        self.stage1.pretrain.validate()?;
        self.open_loop.validate()?;
        self.report.validate()?;
        if self.network.layer_sizes[0] != self.ops.n_neurons {
            return Err(HarnessError::config(format!(
                "network expects {} inputs but the brain has {} neurons",
                self.network.layer_sizes[0], self.ops.n_neurons
            )));
        }
        if self.network.layer_sizes.last() != Some(&(2 * self.env.n_classes)) {
            return Err(HarnessError::config("output layer must have 2 * env.n_classes units"));
        }
        if !(0.0..=1.0).contains(&self.stage1.jitter) {
            return Err(HarnessError::config("stage1.jitter must lie in [0, 1]"));
        }
        self.perturbation.validate(self.ops.n_neurons)?;
        if matches!(self.mode, Mode::ClosedLoop | Mode::Sweep) && self.seeds.is_empty() {
            return Err(HarnessError::config("closed-loop runs need at least one seed"));
        }
        if self.trials == 0 {
            return Err(HarnessError::config("trials must be at least 1"));
        }
        let [a, b] = self.sweep.window;
        if a >= b {
            return Err(HarnessError::config("sweep.window must be a nonempty range"));
        }
        for &r in &self.sweep.ratios {
            if !(0.0..=0.9).contains(&r) {
                return Err(HarnessError::config(format!("sweep ratio {r} outside [0, 0.9]")));
            }
        }
        if self.sweep.kinds.is_empty() || self.sweep.learners.is_empty() || self.sweep.ratios.is_empty() {
            return Err(HarnessError::config("sweep needs at least one kind, ratio and learner"));
        }
        Ok(())
    }
}
