use serde::{Deserialize, Serialize};

use super::SpikeBinVector;
use crate::error::{Error, Result};
use crate::num::Real;

/// Leak and threshold of one LIF population. The reset magnitude equals the
/// threshold (subtractive reset).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifParams<T> {
    pub beta: T,
    pub u_thr: T,
}

impl<T: Real> LifParams<T> {
    pub fn new(beta: T, u_thr: T) -> Result<Self> {
        let p = Self { beta, u_thr };
        p.validate()?;
        Ok(p)
    }

    /// `beta = exp(-dt / tau)`.
    pub fn from_time_constant(dt: T, tau: T, u_thr: T) -> Result<Self> {
        Self::new((-dt / tau).exp(), u_thr)
    }

    pub fn theta(&self) -> T {
        self.u_thr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta <= T::one()) {
            return Err(Error::config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.u_thr > T::zero()) || !self.u_thr.is_finite() {
            return Err(Error::config(format!("threshold must be positive, got {}", self.u_thr)));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> LifParams<U> {
        LifParams { beta: U::of(self.beta.as_f64()), u_thr: U::of(self.u_thr.as_f64()) }
    }
}

impl<T: Real> Default for LifParams<T> {
    fn default() -> Self {
        Self { beta: T::of(0.9), u_thr: T::one() }
    }
}

/// One fully connected LIF layer. Weights are row-major `[n_out x n_in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LifLayer<T> {
    n_in: usize,
    n_out: usize,
    weights: Vec<T>,
    membrane: Vec<T>,
    last_spikes: Vec<bool>,
    params: LifParams<T>,
}

impl<T: Real> LifLayer<T> {
    pub fn zeros(n_in: usize, n_out: usize, params: LifParams<T>) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![T::zero(); n_in * n_out],
            membrane: vec![T::zero(); n_out],
            last_spikes: vec![false; n_out],
            params,
        }
    }

    pub fn with_weights(n_in: usize, n_out: usize, weights: Vec<T>, params: LifParams<T>) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::config("layer dimensions must be at least 1"));
        }
        if weights.len() != n_in * n_out {
            return Err(Error::config(format!(
                "weight matrix has {} entries, expected {n_out}x{n_in}",
                weights.len()
            )));
        }
        params.validate()?;
        let mut layer = Self::zeros(n_in, n_out, params);
        layer.weights = weights;
        Ok(layer)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn params(&self) -> &LifParams<T> {
        &self.params
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.n_in + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.weights[row * self.n_in..(row + 1) * self.n_in]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        let n = self.n_in;
        &mut self.weights[row * n..(row + 1) * n]
    }

    pub fn membrane(&self) -> &[T] {
        &self.membrane
    }

    /// Spikes emitted at the most recent step.
    pub fn spikes(&self) -> &[bool] {
        &self.last_spikes
    }

    pub fn set_state(&mut self, membrane: Vec<T>, last_spikes: Vec<bool>) -> Result<()> {
        if membrane.len() != self.n_out || last_spikes.len() != self.n_out {
            return Err(Error::config("state length does not match layer width"));
        }
        self.membrane = membrane;
        self.last_spikes = last_spikes;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.membrane.iter_mut().for_each(|m| *m = T::zero());
        self.last_spikes.iter_mut().for_each(|s| *s = false);
    }

    /// Event-driven step: only columns of active inputs are fetched.
    pub fn step(&mut self, input: &SpikeBinVector) -> Result<()> {
        if input.len() != self.n_in {
            return Err(Error::config(format!(
                "layer expects {} inputs, got {}",
                self.n_in,
                input.len()
            )));
        }
        let active = input.active_indices();
        self.step_active(&active);
        Ok(())
    }

    pub(crate) fn step_active(&mut self, active: &[usize]) {
        let LifParams { beta, u_thr } = self.params;
        for r in 0..self.n_out {
            let row = &self.weights[r * self.n_in..(r + 1) * self.n_in];
            let mut drive = T::zero();
            for &c in active {
                drive += row[c];
            }
            self.integrate(r, beta, u_thr, drive);
        }
    }

    /// Step with a real-valued input (used by training with dropout scaling).
    pub fn step_dense(&mut self, input: &[T]) -> Result<()> {
        if input.len() != self.n_in {
            return Err(Error::config(format!(
                "layer expects {} inputs, got {}",
                self.n_in,
                input.len()
            )));
        }
        let LifParams { beta, u_thr } = self.params;
        for r in 0..self.n_out {
            let row = &self.weights[r * self.n_in..(r + 1) * self.n_in];
            let drive: T = row.iter().zip(input).map(|(&w, &x)| w * x).sum();
            self.integrate(r, beta, u_thr, drive);
        }
        Ok(())
    }

    #[inline]
    fn integrate(&mut self, r: usize, beta: T, u_thr: T, drive: T) {
        let reset = if self.last_spikes[r] { u_thr } else { T::zero() };
        let u = beta * self.membrane[r] + drive - reset;
        self.membrane[r] = u;
        self.last_spikes[r] = u > u_thr;
    }
}

/// Advances `layer` by one bin and returns the emitted spikes together with
/// the post-update membrane.
pub fn lif_step<T: Real>(layer: &mut LifLayer<T>, input: &SpikeBinVector) -> Result<(SpikeBinVector, Vec<T>)> {
    layer.step(input)?;
    Ok((SpikeBinVector::from_bits(layer.spikes().to_vec()), layer.membrane().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_layer(beta: f64, w: f64) -> LifLayer<f64> {
        LifLayer::with_weights(1, 1, vec![w], LifParams::new(beta, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        let mut l = LifLayer::<f64>::zeros(3, 2, LifParams::default());
        let (s, m) = lif_step(&mut l, &SpikeBinVector::zeros(3)).unwrap();
        assert_eq!(s.count_active(), 0);
        assert_eq!(m, vec![0.0, 0.0]);
    }

    #[test]
    fn subtractive_reset_by_hand() {
        let mut l = scalar_layer(1.0, 2.0);
        let (s, m) = lif_step(&mut l, &SpikeBinVector::from_u8(&[1])).unwrap();
        assert!(s.get(0));
        assert_eq!(m[0], 2.0);
        // 1*2 + 0 - 1*1 = 1, not above threshold
        let (s, m) = lif_step(&mut l, &SpikeBinVector::from_u8(&[0])).unwrap();
        assert!(!s.get(0));
        assert_eq!(m[0], 1.0);
    }

    #[test]
    fn constant_drive_matches_scalar_recurrence() {
        // constant W*X = 0.5 with beta = 0.9
        let mut l = scalar_layer(0.9, 0.5);
        let (mut u, mut s) = (0.0f64, false);
        for _ in 0..100 {
            u = 0.9 * u + 0.5 - if s { 1.0 } else { 0.0 };
            s = u > 1.0;
            let (spk, m) = lif_step(&mut l, &SpikeBinVector::from_u8(&[1])).unwrap();
            assert_eq!(spk.get(0), s);
            assert!((m[0] - u).abs() <= 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut l = LifLayer::<f64>::zeros(3, 2, LifParams::default());
        assert!(matches!(l.step(&SpikeBinVector::zeros(4)), Err(Error::Config(_))));
        assert!(matches!(l.step_dense(&[0.0; 2]), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LifParams::new(0.0, 1.0).is_err());
        assert!(LifParams::new(1.1, 1.0).is_err());
        assert!(LifParams::new(0.5, 0.0).is_err());
        assert!(LifParams::new(1.0, 1.0).is_ok());
        let p = LifParams::<f64>::from_time_constant(1.0, 10.0, 1.0).unwrap();
        assert!((p.beta - (-0.1f64).exp()).abs() < 1e-15);
        assert_eq!(p.theta(), p.u_thr);
    }

    #[test]
    fn dense_and_event_driven_agree_on_binary_input() {
        let w = vec![0.3, -0.2, 0.7, 0.1, 0.4, -0.5];
        let p = LifParams::new(0.8, 0.5).unwrap();
        let mut a = LifLayer::with_weights(3, 2, w.clone(), p).unwrap();
        let mut b = LifLayer::with_weights(3, 2, w, p).unwrap();
        for bits in [[1u8, 0, 1], [1, 1, 1], [0, 0, 0], [0, 1, 1]] {
            a.step(&SpikeBinVector::from_u8(&bits)).unwrap();
            let dense: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
            b.step_dense(&dense).unwrap();
            assert_eq!(a.spikes(), b.spikes());
            for (x, y) in a.membrane().iter().zip(b.membrane()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
