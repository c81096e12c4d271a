//! Attention-gated reinforcement learning across all layers.
//!
//! The reward prediction error `delta = r - z_winner` is fed back only
//! through the winning output unit; each hidden layer is gated by its own
//! spikes with a straight-through derivative of 1.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::snn::{DeepSnn, SpikeBinVector};

use super::BackwardTally;

#[derive(Clone, Debug, PartialEq)]
pub struct AgrelLearner {
    alpha: f64,
}

impl AgrelLearner {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::argument(format!("AGREL learning rate must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Computes and applies the update with the learner's own rate.
    pub fn update<T: Real>(
        &self,
        net: &mut DeepSnn<T>,
        input: &SpikeBinVector,
        hidden_spikes: &[SpikeBinVector],
        z_out: &[bool],
        rewards: &[bool],
    ) -> Result<BackwardTally> {
        agrel_apply(net, input, hidden_spikes, z_out, rewards, self.alpha)
    }
}

/// Per-layer weight changes (row-major, same shapes as the weights) plus the
/// operation tally of computing them.
#[derive(Clone, Debug, PartialEq)]
pub struct AgrelDeltas<T> {
    pub per_layer: Vec<Vec<T>>,
    pub tally: BackwardTally,
}

/// Feedback signals for every layer, output last. `fb[i]` has the width of
/// layer `i`; zero entries carry no plasticity.
struct Feedback<T> {
    fb: Vec<Vec<T>>,
    tally: BackwardTally,
}

fn check_inputs<T: Real>(
    net: &DeepSnn<T>,
    input: &SpikeBinVector,
    hidden: &[SpikeBinVector],
    z_out: &[bool],
    rewards: &[bool],
) -> Result<usize> {
    let k = net.depth();
    if hidden.len() + 1 != k {
        return Err(Error::config(format!("expected {} hidden spike vectors, got {}", k - 1, hidden.len())));
    }
    let sizes = net.layer_sizes();
    if input.len() != sizes[0] {
        return Err(Error::config("input width does not match the network"));
    }
    for (i, h) in hidden.iter().enumerate() {
        if h.len() != sizes[i + 1] {
            return Err(Error::config(format!("hidden layer {} spike width mismatch", i + 1)));
        }
    }
    let n_out = sizes[k];
    if z_out.len() != n_out {
        return Err(Error::config("z_out width does not match the output layer"));
    }
    if rewards.is_empty() || n_out % rewards.len() != 0 {
        return Err(Error::config("output layer does not split evenly into reward blocks"));
    }
    let block = n_out / rewards.len();
    for b in 0..rewards.len() {
        let winners = z_out[b * block..(b + 1) * block].iter().filter(|&&z| z).count();
        if winners != 1 {
            return Err(Error::config(format!("z_out block {b} must be one-hot, has {winners} active units")));
        }
    }
    Ok(block)
}

fn feedback<T: Real>(
    net: &DeepSnn<T>,
    hidden: &[SpikeBinVector],
    z_out: &[bool],
    rewards: &[bool],
    block: usize,
) -> Feedback<T> {
    let k = net.depth();
    let mut tally = BackwardTally::default();
    let mut fb: Vec<Vec<T>> = vec![Vec::new(); k];

    // output: fb = delta * z_out, delta = r - 1 for the winner
    fb[k - 1] = z_out
        .iter()
        .enumerate()
        .map(|(u, &z)| {
            let r = if rewards[u / block] { T::one() } else { T::zero() };
            if z {
                r - T::one()
            } else {
                T::zero()
            }
        })
        .collect();

    for i in (0..k - 1).rev() {
        let upper = &net.layers()[i + 1];
        let fb_up = &fb[i + 1];
        let spikes = &hidden[i];
        let n = upper.n_in();
        let mut e = vec![T::zero(); n];
        let mut nz_up = 0;
        for (u, &f) in fb_up.iter().enumerate() {
            if f != T::zero() {
                nz_up += 1;
                for (ej, &w) in e.iter_mut().zip(upper.row(u)) {
                    *ej += f * w;
                }
            }
        }
        tally.macs += (nz_up * n) as u64;
        tally.mem_access += (nz_up * n) as u64;
        let mut gated = 0;
        let this: Vec<T> = e
            .iter()
            .enumerate()
            .map(|(j, &ej)| {
                if spikes.get(j) && ej != T::zero() {
                    gated += 1;
                    ej
                } else {
                    T::zero()
                }
            })
            .collect();
        tally.mem_access += gated as u64;
        fb[i] = this;
    }
    Feedback { fb, tally }
}

/// Dense per-layer `dW_i = alpha * fb_i (x) S_{i-1}` using the weights as
/// they are before any of this step's changes.
pub fn agrel_deltas<T: Real>(
    net: &DeepSnn<T>,
    input: &SpikeBinVector,
    hidden_spikes: &[SpikeBinVector],
    z_out: &[bool],
    rewards: &[bool],
    alpha: T,
) -> Result<AgrelDeltas<T>> {
    let block = check_inputs(net, input, hidden_spikes, z_out, rewards)?;
    let Feedback { fb, mut tally } = feedback(net, hidden_spikes, z_out, rewards, block);
    let mut per_layer = Vec::with_capacity(net.depth());
    for (i, layer) in net.layers().iter().enumerate() {
        let pre = if i == 0 { input } else { &hidden_spikes[i - 1] };
        let n_in = layer.n_in();
        let mut dw = vec![T::zero(); layer.n_out() * n_in];
        let active = pre.active_indices();
        for (r, &f) in fb[i].iter().enumerate() {
            if f == T::zero() {
                continue;
            }
            tally.macs += active.len() as u64;
            tally.mem_access += active.len() as u64;
            for &c in &active {
                dw[r * n_in + c] = alpha * f;
            }
        }
        per_layer.push(dw);
    }
    Ok(AgrelDeltas { per_layer, tally })
}

/// Computes the feedback and applies `alpha * fb_i (x) S_{i-1}` to every
/// layer in place. Only nonzero-feedback rows and active columns are touched.
pub fn agrel_apply<T: Real>(
    net: &mut DeepSnn<T>,
    input: &SpikeBinVector,
    hidden_spikes: &[SpikeBinVector],
    z_out: &[bool],
    rewards: &[bool],
    alpha: f64,
) -> Result<BackwardTally> {
    let block = check_inputs(net, input, hidden_spikes, z_out, rewards)?;
    if rewards.iter().all(|&r| r) {
        // delta = 0 everywhere
        return Ok(BackwardTally::default());
    }
    let Feedback { fb, mut tally } = feedback(net, hidden_spikes, z_out, rewards, block);
    let alpha = T::of(alpha);
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        let pre = if i == 0 { input } else { &hidden_spikes[i - 1] };
        let active = pre.active_indices();
        for (r, &f) in fb[i].iter().enumerate() {
            if f == T::zero() {
                continue;
            }
            tally.macs += active.len() as u64;
            tally.mem_access += active.len() as u64;
            let step = alpha * f;
            let row = layer.row_mut(r);
            for &c in &active {
                row[c] += step;
            }
        }
    }
    Ok(tally)
}

/// One-hot winner mask over the output layer, one winner per block.
pub fn winner_mask(n_out: usize, winners: &[usize]) -> Vec<bool> {
    let mut z = vec![false; n_out];
    for &w in winners {
        z[w] = true;
    }
    z
}
