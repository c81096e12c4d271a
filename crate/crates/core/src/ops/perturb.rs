//! Population perturbations applied to a running brain.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::brain::{unit_vector, OpsBrain};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Selected neurons stop firing.
    LossOfNeurons,
    /// Selected neurons get new preferred directions.
    ElectrodeShift,
    /// Selected neurons get a new peak rate in `drift_range`.
    RateDrift,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 3] =
        [PerturbationKind::LossOfNeurons, PerturbationKind::ElectrodeShift, PerturbationKind::RateDrift];

    pub fn label(&self) -> &'static str {
        match self {
            PerturbationKind::LossOfNeurons => "loss_of_neurons",
            PerturbationKind::ElectrodeShift => "electrode_shift",
            PerturbationKind::RateDrift => "rate_drift",
        }
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "loss" | "loss_of_neurons" => Ok(PerturbationKind::LossOfNeurons),
            "shift" | "electrode_shift" => Ok(PerturbationKind::ElectrodeShift),
            "drift" | "rate_drift" => Ok(PerturbationKind::RateDrift),
            other => Err(Error::argument(format!("unknown perturbation kind '{other}'"))),
        }
    }
}

fn default_drift_range() -> [f64; 2] {
    [0.0, 30.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Fraction of neurons affected, in `[0, 1)`.
    pub ratio: f64,
    /// First trial generated by the perturbed brain.
    pub onset_trial: usize,
    pub seed: u64,
    /// New peak-rate range for [`PerturbationKind::RateDrift`], spikes/s.
    #[serde(default = "default_drift_range")]
    pub drift_range: [f64; 2],
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, ratio: f64, onset_trial: usize, seed: u64) -> Self {
        Self { kind, ratio, onset_trial, seed, drift_range: default_drift_range() }
    }

    /// Number of neurons touched in a population of `n`.
    pub fn count(&self, n: usize) -> usize {
        (self.ratio * n as f64).round() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::argument(format!("perturbation ratio must lie in [0, 1), got {}", self.ratio)));
        }
        if self.ratio > 0.0 && self.count(n) == 0 {
            return Err(Error::argument("perturbation ratio selects no neuron"));
        }
        let [a, b] = self.drift_range;
        if !(0.0 <= a && a <= b) {
            return Err(Error::argument("drift range must satisfy 0 <= low <= high"));
        }
        Ok(())
    }
}

/// Applies `spec` to `brain` and returns the affected neuron indices
/// (ascending). Selection and resampling use a fresh generator seeded from
/// `spec.seed`, so applying the same spec twice is a no-op the second time.
pub fn apply_perturbation(brain: &mut OpsBrain, spec: &PerturbationSpec) -> Result<Vec<usize>> {
    let n = brain.n_neurons();
    spec.validate(n)?;
    let m = spec.count(n);
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = sample(&mut rng, n, m).into_vec();
    chosen.sort_unstable();
    for &k in &chosen {
        match spec.kind {
            PerturbationKind::LossOfNeurons => brain.removed[k] = true,
            PerturbationKind::ElectrodeShift => {
                brain.preferred[k] = unit_vector(rng.random_range(0.0..std::f64::consts::TAU));
            }
            PerturbationKind::RateDrift => {
                let [a, b] = spec.drift_range;
                let hi = if b > a { rng.random_range(a..b) } else { a };
                brain.lambda_max[k] = hi;
                brain.lambda_min[k] = brain.lambda_min[k].min(hi);
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::OpsParams;

    fn brain() -> OpsBrain {
        OpsBrain::new(&OpsParams::default(), 21).unwrap()
    }

    #[test]
    fn zero_ratio_is_identity() {
        for kind in PerturbationKind::ALL {
            let mut b = brain();
            let before = b.clone();
            assert!(apply_perturbation(&mut b, &PerturbationSpec::new(kind, 0.0, 50, 1)).unwrap().is_empty());
            assert_eq!(b, before);
        }
    }

    #[test]
    fn thirty_of_forty_six_go_silent() {
        let mut b = brain();
        let spec = PerturbationSpec::new(PerturbationKind::LossOfNeurons, 30.0 / 46.0, 50, 4);
        let chosen = apply_perturbation(&mut b, &spec).unwrap();
        assert_eq!(chosen.len(), 30);
        assert_eq!(b.removed().iter().filter(|&&r| r).count(), 30);
        for _ in 0..2000 {
            let s = b.generate([0.3, 0.9]);
            for &k in &chosen {
                assert!(!s.get(k));
            }
        }
    }

    #[test]
    fn shift_and_drift_touch_only_selected() {
        for kind in [PerturbationKind::ElectrodeShift, PerturbationKind::RateDrift] {
            let mut b = brain();
            let before = b.clone();
            let chosen = apply_perturbation(&mut b, &PerturbationSpec::new(kind, 0.5, 0, 8)).unwrap();
            assert_eq!(chosen.len(), 23);
            for k in 0..46 {
                let same = b.preferred()[k] == before.preferred()[k] && b.lambda_max()[k] == before.lambda_max()[k];
                assert_eq!(same, !chosen.contains(&k), "{kind:?} neuron {k}");
                assert!(b.lambda_min()[k] <= b.lambda_max()[k]);
                if kind == PerturbationKind::RateDrift && chosen.contains(&k) {
                    assert!(b.lambda_max()[k] < 30.0);
                }
            }
        }
    }

    #[test]
    fn idempotent_and_deterministic() {
        for kind in PerturbationKind::ALL {
            let spec = PerturbationSpec::new(kind, 0.4, 0, 77);
            let mut a = brain();
            let mut b = brain();
            let sa = apply_perturbation(&mut a, &spec).unwrap();
            let sb = apply_perturbation(&mut b, &spec).unwrap();
            assert_eq!(sa, sb);
            assert_eq!(a, b);
            apply_perturbation(&mut a, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ratio_bounds() {
        let mut b = brain();
        for r in [1.0, 1.5, -0.1] {
            assert!(matches!(
                apply_perturbation(&mut b, &PerturbationSpec::new(PerturbationKind::LossOfNeurons, r, 0, 0)),
                Err(Error::Argument(_))
            ));
        }
        assert!(apply_perturbation(&mut b, &PerturbationSpec::new(PerturbationKind::LossOfNeurons, 0.005, 0, 0)).is_err());
        assert_eq!("drift".parse::<PerturbationKind>().unwrap(), PerturbationKind::RateDrift);
    }
}
