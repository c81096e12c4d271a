//! Cosine-tuned Poisson-like population driven by an intended direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::SpikeBinVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpsParams {
    pub n_neurons: usize,
    /// Baseline rate range in spikes/s.
    pub lambda_min_range: [f64; 2],
    /// Peak rate range in spikes/s.
    pub lambda_max_range: [f64; 2],
    /// Standard deviation of the additive drive noise.
    pub noise_sigma: f64,
    /// Bin length in seconds.
    pub bin_s: f64,
}

impl Default for OpsParams {
    fn default() -> Self {
        Self {
            n_neurons: 46,
            lambda_min_range: [0.0, 5.0],
            lambda_max_range: [40.0, 100.0],
            noise_sigma: 0.3,
            bin_s: 0.01,
        }
    }
}

impl OpsParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::config("brain needs at least one neuron"));
        }
        let [a, b] = self.lambda_min_range;
        let [c, d] = self.lambda_max_range;
        if !(0.0 <= a && a <= b && b < c && c <= d) {
            return Err(Error::config("rate ranges must satisfy 0 <= min range < max range"));
        }
        if !(self.noise_sigma >= 0.0) || !(self.bin_s > 0.0) {
            return Err(Error::config("noise sigma must be >= 0 and bin length > 0"));
        }
        Ok(())
    }
}

/// Simulated cortex: neuron `k` fires with probability
/// `clamp(lambda_k * T, 0, 1)` where
/// `lambda_k = clamp((lmax_k - lmin_k)(c_k . x + eta) + lmin_k, 0, lmax_k)`.
#[derive(Clone, Debug)]
pub struct OpsBrain {
    pub(crate) preferred: Vec<[f64; 2]>,
    pub(crate) lambda_min: Vec<f64>,
    pub(crate) lambda_max: Vec<f64>,
    pub(crate) removed: Vec<bool>,
    noise_sigma: f64,
    bin_s: f64,
    rng: ChaCha8Rng,
}

impl PartialEq for OpsBrain {
    /// Compares the tuning state, not the RNG position.
    fn eq(&self, o: &Self) -> bool {
        self.preferred == o.preferred
            && self.lambda_min == o.lambda_min
            && self.lambda_max == o.lambda_max
            && self.removed == o.removed
            && self.noise_sigma == o.noise_sigma
            && self.bin_s == o.bin_s
    }
}

pub(crate) fn unit_vector(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

impl OpsBrain {
    /// Samples tuning parameters from `seed`; spike draws continue on the
    /// same stream.
    pub fn new(params: &OpsParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.n_neurons;
        let preferred = (0..n).map(|_| unit_vector(rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let [a, b] = params.lambda_min_range;
        let [c, d] = params.lambda_max_range;
        let lambda_min = (0..n).map(|_| if b > a { rng.random_range(a..b) } else { a }).collect();
        let lambda_max = (0..n).map(|_| if d > c { rng.random_range(c..d) } else { c }).collect();
        Ok(Self {
            preferred,
            lambda_min,
            lambda_max,
            removed: vec![false; n],
            noise_sigma: params.noise_sigma,
            bin_s: params.bin_s,
            rng,
        })
    }

    /// Builds a brain from explicit tuning.
    pub fn from_tuning(
        preferred: Vec<[f64; 2]>,
        lambda_min: Vec<f64>,
        lambda_max: Vec<f64>,
        noise_sigma: f64,
        bin_s: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = preferred.len();
        if lambda_min.len() != n || lambda_max.len() != n || n == 0 {
            return Err(Error::config("tuning vectors must be nonempty and equally long"));
        }
        for k in 0..n {
            let norm = preferred[k][0].hypot(preferred[k][1]);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("preferred direction {k} is not a unit vector")));
            }
            if !(0.0 <= lambda_min[k] && lambda_min[k] <= lambda_max[k]) {
                return Err(Error::config(format!("neuron {k} needs 0 <= lambda_min <= lambda_max")));
            }
        }
        if !(noise_sigma >= 0.0) || !(bin_s > 0.0) {
            return Err(Error::config("noise sigma must be >= 0 and bin length > 0"));
        }
        Ok(Self {
            preferred,
            lambda_min,
            lambda_max,
            removed: vec![false; n],
            noise_sigma,
            bin_s,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.preferred.len()
    }

    pub fn preferred(&self) -> &[[f64; 2]] {
        &self.preferred
    }

    pub fn lambda_min(&self) -> &[f64] {
        &self.lambda_min
    }

    pub fn lambda_max(&self) -> &[f64] {
        &self.lambda_max
    }

    pub fn removed(&self) -> &[bool] {
        &self.removed
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn set_noise_sigma(&mut self, sigma: f64) {
        self.noise_sigma = sigma.max(0.0);
    }

    pub fn bin_s(&self) -> f64 {
        self.bin_s
    }

    /// Rotates every preferred direction by `angle` radians.
    pub fn rotate_preferred(&mut self, angle: f64) {
        let (s, c) = angle.sin_cos();
        for p in &mut self.preferred {
            *p = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        }
    }

    /// Clamped rate of neuron `k` for a given total drive.
    pub fn rate_for_drive(&self, k: usize, drive: f64) -> f64 {
        if self.removed[k] {
            return 0.0;
        }
        let (lo, hi) = (self.lambda_min[k], self.lambda_max[k]);
        ((hi - lo) * drive + lo).clamp(0.0, hi)
    }

    /// Noise-free rate of neuron `k`.
    pub fn expected_rate(&self, k: usize, x: [f64; 2]) -> f64 {
        let c = self.preferred[k];
        self.rate_for_drive(k, c[0] * x[0] + c[1] * x[1])
    }

    /// Noise-free spike probability of neuron `k` in one bin.
    pub fn spike_probability(&self, k: usize, x: [f64; 2]) -> f64 {
        (self.expected_rate(k, x) * self.bin_s).clamp(0.0, 1.0)
    }

    /// Draws one bin of spikes for intended direction `x` (`|x| <= 1`).
    pub fn generate(&mut self, x: [f64; 2]) -> SpikeBinVector {
        let n = self.n_neurons();
        let noise = (self.noise_sigma > 0.0).then(|| Normal::new(0.0, self.noise_sigma).expect("sigma checked"));
        let mut bits = vec![false; n];
        for (k, bit) in bits.iter_mut().enumerate() {
            let c = self.preferred[k];
            let mut drive = c[0] * x[0] + c[1] * x[1];
            if let Some(d) = &noise {
                drive += d.sample(&mut self.rng);
            }
            let p = (self.rate_for_drive(k, drive) * self.bin_s).clamp(0.0, 1.0);
            *bit = self.rng.random::<f64>() < p;
        }
        SpikeBinVector::from_bits(bits)
    }
}

/// Free-function form of [`OpsBrain::generate`].
pub fn ops_generate(brain: &mut OpsBrain, x: [f64; 2]) -> SpikeBinVector {
    brain.generate(x)
}
