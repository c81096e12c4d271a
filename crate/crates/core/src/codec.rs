//! Velocity <-> class conversion and spike binning.
//!
//! Each axis is quantized independently into `B` uniform bins. Decoded
//! classes map back to bin centres and the caller holds that value until the
//! next prediction (zero-order hold).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::snn::SpikeBinVector;

/// Half-width used when fitting degenerates to a zero range.
pub const DEGENERATE_HALF_RANGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct AxisQuantizer<T> {
    n_bins: usize,
    v_min: T,
    v_max: T,
    edges: Vec<T>,
    centers: Vec<T>,
    /// Set when the range had to be widened artificially.
    #[serde(default)]
    degenerate: bool,
}

impl<T: Real> AxisQuantizer<T> {
    pub fn new(n_bins: usize, v_min: T, v_max: T) -> Result<Self> {
        if n_bins < 1 {
            return Err(Error::argument("quantizer needs at least one bin"));
        }
        if !(v_max > v_min) || !v_min.is_finite() || !v_max.is_finite() {
            return Err(Error::argument(format!("invalid velocity range [{v_min}, {v_max}]")));
        }
        let width = (v_max - v_min) / T::of_usize(n_bins);
        let edges: Vec<T> = (0..=n_bins)
            .map(|i| if i == n_bins { v_max } else { v_min + width * T::of_usize(i) })
            .collect();
        let half = T::of(0.5);
        let centers = edges.windows(2).map(|e| (e[0] + e[1]) * half).collect();
        Ok(Self { n_bins, v_min, v_max, edges, centers, degenerate: false })
    }

    /// Symmetric range `[-half_range, half_range]`.
    pub fn symmetric(n_bins: usize, half_range: T) -> Result<Self> {
        Self::new(n_bins, -half_range, half_range)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn v_min(&self) -> T {
        self.v_min
    }

    pub fn v_max(&self) -> T {
        self.v_max
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn bin_width(&self) -> T {
        (self.v_max - self.v_min) / T::of_usize(self.n_bins)
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Bin containing `v`. Interior edges belong to the upper bin; values
    /// outside the range clamp to the first or last class.
    pub fn quantize(&self, v: T) -> usize {
        let last = self.n_bins - 1;
        if v.is_nan() || v < self.edges[1] {
            return 0;
        }
        if v >= self.edges[last] {
            return last;
        }
        let guess = ((v - self.v_min) / self.bin_width()).floor().to_usize().unwrap_or(0).min(last);
        // nudge the arithmetic guess onto the stored edges
        let mut i = guess;
        while i < last && v >= self.edges[i + 1] {
            i += 1;
        }
        while i > 0 && v < self.edges[i] {
            i -= 1;
        }
        i
    }

    pub fn reconstruct(&self, class: usize) -> Result<T> {
        self.centers
            .get(class)
            .copied()
            .ok_or_else(|| Error::argument(format!("class {class} outside [0, {})", self.n_bins)))
    }

    /// Fits a symmetric range `+-max(|p1|, |p99|)` to training velocities.
    pub fn fit(training: &[T], n_bins: usize) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::argument("cannot fit a quantizer to an empty sequence"));
        }
        let mut sorted: Vec<T> = training.iter().copied().filter(|v| v.is_finite()).collect();
        if sorted.is_empty() {
            return Err(Error::argument("no finite velocities to fit"));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let p1 = percentile(&sorted, 1.0);
        let p99 = percentile(&sorted, 99.0);
        let half = p1.abs().max(p99.abs());
        let floor = T::of(DEGENERATE_HALF_RANGE);
        if half < floor {
            let mut q = Self::symmetric(n_bins, floor)?;
            q.degenerate = true;
            return Ok(q);
        }
        Self::symmetric(n_bins, half)
    }

    pub fn cast<U: Real>(&self) -> AxisQuantizer<U> {
        let mut q = AxisQuantizer::new(self.n_bins, U::of(self.v_min.as_f64()), U::of(self.v_max.as_f64()))
            .expect("range already validated");
        q.degenerate = self.degenerate;
        q
    }
}

/// Linear-interpolated percentile of sorted data (`q` in percent).
pub fn percentile<T: Real>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Free-function form of [`AxisQuantizer::quantize`].
pub fn quantize<T: Real>(q: &AxisQuantizer<T>, v: T) -> usize {
    q.quantize(v)
}

/// Free-function form of [`AxisQuantizer::reconstruct`].
pub fn reconstruct<T: Real>(q: &AxisQuantizer<T>, class: usize) -> Result<T> {
    q.reconstruct(class)
}

/// Free-function form of [`AxisQuantizer::fit`].
pub fn fit_quantizer<T: Real>(training: &[T], n_bins: usize) -> Result<AxisQuantizer<T>> {
    AxisQuantizer::fit(training, n_bins)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabelPair {
    pub x: usize,
    pub y: usize,
}

impl ClassLabelPair {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn axis(&self, axis: usize) -> usize {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }

    pub fn as_array(&self) -> [usize; 2] {
        [self.x, self.y]
    }
}

/// Independent x and y quantizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct VelocityCodec<T> {
    pub x: AxisQuantizer<T>,
    pub y: AxisQuantizer<T>,
}

impl<T: Real> VelocityCodec<T> {
    pub fn symmetric(n_bins: usize, half_range: T) -> Result<Self> {
        let q = AxisQuantizer::symmetric(n_bins, half_range)?;
        Ok(Self { x: q.clone(), y: q })
    }

    pub fn fit(velocities: &[[T; 2]], n_bins: usize) -> Result<Self> {
        let xs: Vec<T> = velocities.iter().map(|v| v[0]).collect();
        let ys: Vec<T> = velocities.iter().map(|v| v[1]).collect();
        Ok(Self { x: AxisQuantizer::fit(&xs, n_bins)?, y: AxisQuantizer::fit(&ys, n_bins)? })
    }

    pub fn n_classes(&self) -> usize {
        self.x.n_bins()
    }

    pub fn axis(&self, axis: usize) -> &AxisQuantizer<T> {
        if axis == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn quantize(&self, v: [T; 2]) -> ClassLabelPair {
        ClassLabelPair { x: self.x.quantize(v[0]), y: self.y.quantize(v[1]) }
    }

    pub fn reconstruct(&self, c: ClassLabelPair) -> Result<[T; 2]> {
        Ok([self.x.reconstruct(c.x)?, self.y.reconstruct(c.y)?])
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.n_bins() != self.y.n_bins() {
            return Err(Error::config("x and y quantizers must have the same class count"));
        }
        Ok(())
    }
}

/// Bit `k` is set iff channel `k` has at least one event in `[t0, t0 + width)`.
pub fn bin_spikes(spike_times: &[Vec<f64>], t0: f64, width: f64) -> Result<SpikeBinVector> {
    if !(width > 0.0) {
        return Err(Error::argument("bin width must be positive"));
    }
    let t1 = t0 + width;
    Ok(SpikeBinVector::from_bits(
        spike_times.iter().map(|events| events.iter().any(|&t| t >= t0 && t < t1)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> AxisQuantizer<f64> {
        AxisQuantizer::symmetric(4, 1.0).unwrap()
    }

    fn linear_scan(q: &AxisQuantizer<f64>, v: f64) -> usize {
        let e = q.edges();
        let mut c = 0;
        for i in 1..q.n_bins() {
            if v >= e[i] {
                c = i;
            }
        }
        c
    }

    #[test]
    fn endpoints_and_interior_edges() {
        let q = unit();
        assert_eq!(q.edges(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(q.quantize(-1.0), 0);
        assert_eq!(q.quantize(0.999), 3);
        assert_eq!(q.quantize(1.0), 3);
        assert_eq!(q.quantize(-0.25), 1);
        assert_eq!(q.quantize(0.0), 2);
        assert_eq!(q.quantize(-0.5), 1);
        assert_eq!(q.quantize(-7.0), 0);
        assert_eq!(q.quantize(7.0), 3);
    }

    #[test]
    fn centers_are_midpoints() {
        let q = unit();
        assert_eq!(q.reconstruct(0).unwrap(), -0.75);
        assert_eq!(q.reconstruct(3).unwrap(), 0.75);
        for c in 0..4 {
            assert_eq!(q.quantize(q.reconstruct(c).unwrap()), c);
        }
        assert!(matches!(q.reconstruct(4), Err(Error::Argument(_))));
    }

    #[test]
    fn reconstruction_error_within_half_bin() {
        let q = unit();
        let half = q.bin_width() / 2.0;
        for i in 0..10_000 {
            let v = -1.0 + 2.0 * i as f64 / 9_999.0;
            let r = q.reconstruct(q.quantize(v)).unwrap();
            assert!((r - v).abs() <= half + 1e-12, "v={v} r={r}");
        }
    }

    #[test]
    fn fit_degenerate_and_empty() {
        let q = AxisQuantizer::fit(&[0.0f64; 20], 4).unwrap();
        assert!(q.is_degenerate());
        assert_eq!(q.v_max(), DEGENERATE_HALF_RANGE);
        assert!(AxisQuantizer::<f64>::fit(&[], 4).is_err());
    }

    #[test]
    fn fit_symmetric_data() {
        // evenly spaced in [-2, 2]: p1/p99 are the percentile oracle values
        let data: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let q = AxisQuantizer::fit(&data, 4).unwrap();
        let oracle = 2.0 - 0.01 * 0.01 * 400.0; // 1% of the way in from each end
        assert!((q.v_max() - oracle).abs() < 1e-9);
        assert_eq!(q.v_min(), -q.v_max());
    }

    #[test]
    fn fit_is_robust_to_outliers() {
        let clean: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.7).sin() * 3.0).collect();
        let mut dirty = clean.clone();
        for i in 0..8 {
            dirty[i * 100] = 1e6;
        }
        let a = AxisQuantizer::fit(&clean, 4).unwrap();
        let b = AxisQuantizer::fit(&dirty, 4).unwrap();
        assert!((a.v_max() - b.v_max()).abs() < 0.05, "{} vs {}", a.v_max(), b.v_max());
    }

    #[test]
    fn binning_half_open() {
        let empty: Vec<Vec<f64>> = vec![vec![]; 3];
        assert_eq!(bin_spikes(&empty, 0.0, 0.004).unwrap().count_active(), 0);
        let ev = vec![vec![1.0], vec![1.004], vec![0.999, 1.0039]];
        let b = bin_spikes(&ev, 1.0, 0.004).unwrap();
        assert_eq!(b.bits(), &[true, false, true]);
        assert!(bin_spikes(&ev, 1.0, 0.0).is_err());
    }

    #[test]
    fn codec_axes_are_independent() {
        let codec = VelocityCodec { x: AxisQuantizer::symmetric(4, 1.0).unwrap(), y: AxisQuantizer::symmetric(4, 10.0).unwrap() };
        let c = codec.quantize([0.6, -6.0]);
        assert_eq!(c, ClassLabelPair::new(3, 0));
        assert_eq!(codec.reconstruct(c).unwrap(), [0.75, -7.5]);
    }

    proptest! {
        #[test]
        fn quantize_matches_linear_scan(v in -1.5f64..1.5) {
            let q = unit();
            prop_assert_eq!(q.quantize(v), linear_scan(&q, v));
        }

        #[test]
        fn class_round_trip_any_range(b in 1usize..12, lo in -50.0f64..0.0, span in 0.01f64..100.0) {
            let q = AxisQuantizer::new(b, lo, lo + span).unwrap();
            for c in 0..b {
                prop_assert_eq!(q.quantize(q.reconstruct(c).unwrap()), c);
            }
        }

        #[test]
        fn binning_matches_interval_count(
            events in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 0..6), 1..8),
            t0 in 0.0f64..0.9,
        ) {
            let w = 0.05;
            let b = bin_spikes(&events, t0, w).unwrap();
            for (k, ev) in events.iter().enumerate() {
                let count = ev.iter().filter(|&&t| t0 <= t && t < t0 + w).count();
                prop_assert_eq!(b.get(k), count >= 1);
            }
        }
    }
}
