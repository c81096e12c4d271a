//! Banditron: epsilon-uniform exploration with an importance-weighted
//! perceptron update on the output layer only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::snn::{LifLayer, SpikeBinVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exploration {
    pub sampled: usize,
    /// Probability with which `sampled` was drawn.
    pub prob: f64,
}

#[derive(Clone, Debug)]
pub struct BanditronLearner {
    epsilon: f64,
    n_classes: usize,
    /// Multiplier on the update; 1.0 is the classical Banditron.
    rate: f64,
    rng: ChaCha8Rng,
}

impl BanditronLearner {
    pub fn new(epsilon: f64, n_classes: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::argument(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        if n_classes < 2 {
            return Err(Error::argument("Banditron needs at least two classes"));
        }
        Ok(Self { epsilon, n_classes, rate: 1.0, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `P(c) = (1 - eps) 1[c = predicted] + eps / C`.
    pub fn probability(&self, class: usize, predicted: usize) -> f64 {
        let uniform = self.epsilon / self.n_classes as f64;
        if class == predicted {
            1.0 - self.epsilon + uniform
        } else {
            uniform
        }
    }

    pub fn probabilities(&self, predicted: usize) -> Vec<f64> {
        (0..self.n_classes).map(|c| self.probability(c, predicted)).collect()
    }

    pub fn explore(&mut self, predicted: usize) -> Exploration {
        debug_assert!(predicted < self.n_classes);
        let sampled = if self.rng.random::<f64>() < self.epsilon {
            self.rng.random_range(0..self.n_classes)
        } else {
            predicted
        };
        Exploration { sampled, prob: self.probability(sampled, predicted) }
    }
}

/// Dense `[C x n_in]` update for one axis:
/// `dW[c, j] = s2[j] * (1[y = y~] 1[y~ = c] / P(y~) - 1[y^ = c])`.
///
/// Bandit feedback only reveals `rewarded = 1[y = y~]`, which is all the
/// update needs.
pub fn banditron_delta<T: Real>(
    n_classes: usize,
    s2: &SpikeBinVector,
    predicted: usize,
    sampled: usize,
    prob: f64,
    rewarded: bool,
) -> Result<Vec<T>> {
    check_classes(n_classes, predicted, sampled)?;
    let n = s2.len();
    let mut dw = vec![T::zero(); n_classes * n];
    let gain = importance_weight(prob, rewarded)?;
    for j in s2.active() {
        if rewarded {
            dw[sampled * n + j] += T::of(gain);
        }
        dw[predicted * n + j] -= T::one();
    }
    Ok(dw)
}

/// Applies `rate * dW` to rows `row_offset..row_offset + C` of `layer`,
/// touching only columns where `s2` is active. Returns the number of
/// column updates performed.
#[allow(clippy::too_many_arguments)]
pub fn banditron_apply<T: Real>(
    layer: &mut LifLayer<T>,
    row_offset: usize,
    n_classes: usize,
    s2: &SpikeBinVector,
    predicted: usize,
    sampled: usize,
    prob: f64,
    rewarded: bool,
    rate: f64,
) -> Result<usize> {
    check_classes(n_classes, predicted, sampled)?;
    if s2.len() != layer.n_in() || row_offset + n_classes > layer.n_out() {
        return Err(Error::config("Banditron block does not fit the output layer"));
    }
    let gain = importance_weight(prob, rewarded)?;
    let up = T::of(rate * gain);
    let down = T::of(rate);
    let active = s2.active_indices();
    if rewarded {
        let row = layer.row_mut(row_offset + sampled);
        for &j in &active {
            row[j] += up;
        }
    }
    let row = layer.row_mut(row_offset + predicted);
    for &j in &active {
        row[j] -= down;
    }
    Ok(active.len())
}

fn importance_weight(prob: f64, rewarded: bool) -> Result<f64> {
    if !rewarded {
        return Ok(0.0);
    }
    if !(prob > 0.0) {
        return Err(Error::Internal("Banditron update with zero sampling probability".into()));
    }
    Ok(1.0 / prob)
}

fn check_classes(n_classes: usize, predicted: usize, sampled: usize) -> Result<()> {
    if predicted >= n_classes || sampled >= n_classes {
        return Err(Error::argument(format!(
            "class out of range: predicted {predicted}, sampled {sampled}, C = {n_classes}"
        )));
    }
    Ok(())
}
