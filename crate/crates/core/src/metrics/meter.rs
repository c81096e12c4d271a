use serde::{Deserialize, Serialize};

use super::cost::{footprint_bits, LayerKind};
use crate::learning::BackwardTally;
use crate::num::{Count, Exact};
use crate::snn::ForwardObserver;

/// Live forward counters for one layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTally {
    pub n_in: usize,
    pub n_out: usize,
    pub steps: u64,
    /// Sum over steps of active inputs.
    pub active_in: u64,
}

/// Counts actual weight fetches during inference: per layer and step,
/// `active_in * N_i` weight reads plus `2 N_i` state accesses (all
/// accumulations) and `N_i` membrane updates (multiply-accumulates).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardMeter {
    pub layers: Vec<LayerTally>,
    pub macs: u64,
    pub acs: u64,
    pub mem_access: u64,
}

impl ForwardObserver for ForwardMeter {
    fn layer(&mut self, index: usize, n_in: usize, active_in: usize, n_out: usize) {
        if self.layers.len() <= index {
            self.layers.resize(index + 1, LayerTally::default());
        }
        let t = &mut self.layers[index];
        t.n_in = n_in;
        t.n_out = n_out;
        t.steps += 1;
        t.active_in += active_in as u64;
        let ma = (active_in * n_out + 2 * n_out) as u64;
        self.mem_access += ma;
        self.acs += ma;
        self.macs += n_out as u64;
    }
}

impl ForwardMeter {
    pub fn steps(&self) -> u64 {
        self.layers.first().map_or(0, |l| l.steps)
    }

    /// Observed input sparsity per layer, exactly.
    pub fn observed_sparsity(&self) -> Vec<Exact> {
        self.layers
            .iter()
            .map(|l| {
                let total = (l.n_in as u64 * l.steps) as i64;
                if total == 0 {
                    Exact::from(1)
                } else {
                    Exact::from(1) - Exact::new(l.active_in as i64, total)
                }
            })
            .collect()
    }

    /// Observed sparsities in a chosen scalar (lossy for floats).
    pub fn observed_sparsity_as<T: Count>(&self) -> Vec<T> {
        self.layers
            .iter()
            .map(|l| {
                let total = l.n_in as u64 * l.steps;
                if total == 0 {
                    T::one()
                } else {
                    T::one() - T::of_usize(l.active_in as usize) / T::of_usize(total as usize)
                }
            })
            .collect()
    }

    pub fn merge(&mut self, o: &ForwardMeter) {
        if self.layers.len() < o.layers.len() {
            self.layers.resize(o.layers.len(), LayerTally::default());
        }
        for (a, b) in self.layers.iter_mut().zip(&o.layers) {
            a.n_in = b.n_in;
            a.n_out = b.n_out;
            a.steps += b.steps;
            a.active_in += b.active_in;
        }
        self.macs += o.macs;
        self.acs += o.acs;
        self.mem_access += o.mem_access;
    }
}

/// Forward and backward totals of one run plus the static footprint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub forward: ForwardMeter,
    pub bwd_macs: u64,
    pub bwd_mem_access: u64,
    pub footprint_bits: u64,
}

impl ForwardObserver for ResourceLedger {
    fn layer(&mut self, index: usize, n_in: usize, active_in: usize, n_out: usize) {
        self.forward.layer(index, n_in, active_in, n_out);
    }
}

impl ResourceLedger {
    pub fn for_network(sizes: &[usize]) -> Self {
        Self { footprint_bits: footprint_bits(sizes, LayerKind::Snn), ..Self::default() }
    }

    pub fn record_backward(&mut self, t: BackwardTally) {
        self.bwd_macs += t.macs;
        self.bwd_mem_access += t.mem_access;
    }

    pub fn merge(&mut self, o: &ResourceLedger) {
        self.forward.merge(&o.forward);
        self.bwd_macs += o.bwd_macs;
        self.bwd_mem_access += o.bwd_mem_access;
        self.footprint_bits = self.footprint_bits.max(o.footprint_bits);
    }

    fn per_step(&self, v: u64) -> f64 {
        match self.forward.steps() {
            0 => 0.0,
            n => v as f64 / n as f64,
        }
    }

    pub fn fwd_macs_per_step(&self) -> f64 {
        self.per_step(self.forward.macs)
    }

    pub fn fwd_acs_per_step(&self) -> f64 {
        self.per_step(self.forward.acs)
    }

    pub fn fwd_mem_per_step(&self) -> f64 {
        self.per_step(self.forward.mem_access)
    }

    pub fn bwd_macs_per_step(&self) -> f64 {
        self.per_step(self.bwd_macs)
    }

    pub fn bwd_mem_per_step(&self) -> f64 {
        self.per_step(self.bwd_mem_access)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::forward_cost;
    use crate::snn::{DeepSnn, NetworkConfig, SpikeBinVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn meter_equals_model_at_observed_sparsity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = NetworkConfig::closed_loop();
        let mut net = DeepSnn::<f64>::init(&cfg, &mut rng).unwrap();
        let mut meter = ForwardMeter::default();
        let steps = 200;
        for _ in 0..steps {
            let bits: Vec<bool> = (0..46).map(|_| rng.random_bool(0.3)).collect();
            net.forward_observed(&SpikeBinVector::from_bits(bits), &mut meter).unwrap();
        }
        let s = meter.observed_sparsity();
        let model = forward_cost(&cfg.layer_sizes, &s, LayerKind::Snn, 1).unwrap();
        let n = Exact::from(steps);
        assert_eq!(model.mem_access * n, Exact::from(meter.mem_access as i64));
        assert_eq!(model.acs * n, Exact::from(meter.acs as i64));
        assert_eq!(model.macs * n, Exact::from(meter.macs as i64));
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ResourceLedger::for_network(&[2, 2]);
        a.layer(0, 2, 1, 2);
        a.record_backward(BackwardTally { macs: 3, mem_access: 4 });
        let mut b = a.clone();
        b.merge(&a);
        assert_eq!(b.forward.steps(), 2);
        assert_eq!(b.bwd_macs, 6);
        assert_eq!(b.forward.mem_access, 2 * a.forward.mem_access);
        assert_eq!(a.fwd_mem_per_step(), 6.0);
    }
}
