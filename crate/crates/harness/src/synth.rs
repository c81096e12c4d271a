//! Synthetic multi-session recordings with cross-session drift.
//!
//! Velocity follows an Ornstein-Uhlenbeck process per axis; the simulated
//! population is driven by that velocity clipped to the unit disk. Between
//! sessions the whole array's tuning rotates coherently and a fraction of
//! channels changes peak rate, both scaled by the drift strength.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use spikebmi_core::ops::{apply_perturbation, OpsBrain, OpsParams, PerturbationKind, PerturbationSpec};

use crate::dataset::SpikeDataset;
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_channels: usize,
    pub bin_s: f64,
    pub bins_per_session: usize,
    /// Velocity correlation time, seconds.
    pub velocity_tau: f64,
    /// Stationary standard deviation of each velocity component.
    pub velocity_sd: f64,
    /// Tuning rotation per session at unit strength, degrees.
    pub rotation_deg: f64,
    /// Fraction of channels whose peak rate is resampled per session at
    /// unit strength.
    pub rate_drift_fraction: f64,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_channels: 96,
            bin_s: 0.004,
            bins_per_session: 100_000,
            velocity_tau: 0.3,
            velocity_sd: 0.45,
            rotation_deg: 60.0,
            rate_drift_fraction: 0.1,
            noise_sigma: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.bins_per_session == 0 {
            return Err(HarnessError::config("synth needs channels and bins"));
        }
        if !(self.bin_s > 0.0 && self.velocity_tau > 0.0 && self.velocity_sd >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(HarnessError::config("synth timing and noise parameters must be positive"));
        }
        if !(0.0..1.0).contains(&self.rate_drift_fraction) {
            return Err(HarnessError::config("synth.rate_drift_fraction must lie in [0, 1)"));
        }
        let us = self.bin_s * 1e6;
        if (us - us.round()).abs() > 1e-6 {
            return Err(HarnessError::config("synth.bin_s must be a whole number of microseconds"));
        }
        Ok(())
    }

    fn brain_params(&self) -> OpsParams {
        OpsParams { n_neurons: self.n_channels, bin_s: self.bin_s, noise_sigma: self.noise_sigma, ..OpsParams::default() }
    }
}

/// `synth_dataset_with` under the default generator settings.
pub fn synth_dataset(seed: u64, n_sessions: usize, drift_strength: f64) -> Result<SpikeDataset> {
    synth_dataset_with(&SynthConfig::default(), seed, n_sessions, drift_strength)
}

pub fn synth_dataset_with(cfg: &SynthConfig, seed: u64, n_sessions: usize, drift_strength: f64) -> Result<SpikeDataset> {
    cfg.validate()?;
    if n_sessions == 0 {
        return Err(HarnessError::config("need at least one session"));
    }
    if !(drift_strength >= 0.0) {
        return Err(HarnessError::config("drift strength must be non-negative"));
    }
    let mut brain = OpsBrain::new(&cfg.brain_params(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let a = (-cfg.bin_s / cfg.velocity_tau).exp();
    let step = Normal::new(0.0, cfg.velocity_sd * (1.0 - a * a).sqrt()).expect("finite sd");
    let mut ds = SpikeDataset::new(cfg.n_channels, (cfg.bin_s * 1e6).round() as u32);

    for s in 0..n_sessions {
        if s > 0 && drift_strength > 0.0 {
            brain.rotate_preferred((drift_strength * cfg.rotation_deg).to_radians());
            let drift = PerturbationSpec::new(
                PerturbationKind::RateDrift,
                (drift_strength * cfg.rate_drift_fraction).min(0.99),
                0,
                seed.wrapping_mul(1_000_003).wrapping_add(s as u64),
            );
            if drift.count(cfg.n_channels) > 0 {
                apply_perturbation(&mut brain, &drift)?;
            }
        }
        let mut v = [0.0f64; 2];
        let mut bins = Vec::with_capacity(cfg.bins_per_session);
        let mut vel = Vec::with_capacity(cfg.bins_per_session);
        for _ in 0..cfg.bins_per_session {
            v[0] = a * v[0] + step.sample(&mut rng);
            v[1] = a * v[1] + step.sample(&mut rng);
            let m = v[0].hypot(v[1]);
            let x = if m > 1.0 { [v[0] / m, v[1] / m] } else { v };
            bins.push(brain.generate(x));
            vel.push(v);
        }
        ds.push_session(bins, vel)?;
    }
    Ok(ds)
}
