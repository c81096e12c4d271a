use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LifLayer, LifParams, SpikeBinVector};
use crate::error::{Error, Result};
use crate::num::Real;

/// Architecture and timing of a k-layer fully connected spiking decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// `[N0, N1, ..., Nk]`; `N0` is the number of input channels.
    pub layer_sizes: Vec<usize>,
    /// One entry per layer, or a single entry shared by all layers.
    pub lif: Vec<LifParams<f64>>,
    /// Dropout after each hidden layer, applied only while pretraining.
    pub dropout: f64,
    /// Bin window in seconds.
    pub bin_window: f64,
    /// Stride in seconds; equal to the bin window for streaming.
    pub stride: f64,
}

impl NetworkConfig {
    /// Open-loop decoder: 96 channels, two hidden layers of 30, 4 ms bins.
    pub fn open_loop() -> Self {
        Self {
            layer_sizes: vec![96, 30, 30, 8],
            lif: vec![LifParams::default()],
            dropout: 0.1,
            bin_window: 0.004,
            stride: 0.004,
        }
    }

    /// Closed-loop decoder: 46 simulated neurons, hidden 65 and 40, 10 ms bins.
    pub fn closed_loop() -> Self {
        Self {
            layer_sizes: vec![46, 65, 40, 8],
            lif: vec![LifParams::default()],
            dropout: 0.3,
            bin_window: 0.01,
            stride: 0.01,
        }
    }

    pub fn depth(&self) -> usize {
        self.layer_sizes.len().saturating_sub(1)
    }

    pub fn lif_for(&self, layer: usize) -> LifParams<f64> {
        if self.lif.len() == 1 {
            self.lif[0]
        } else {
            self.lif[layer]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("network needs an input size and at least one layer"));
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::config("all layer sizes must be at least 1"));
        }
        if self.lif.len() != 1 && self.lif.len() != self.depth() {
            return Err(Error::config(format!(
                "expected 1 or {} LIF parameter sets, got {}",
                self.depth(),
                self.lif.len()
            )));
        }
        for p in &self.lif {
            p.validate()?;
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        if !(self.bin_window > 0.0) {
            return Err(Error::config("bin window must be positive"));
        }
        if (self.bin_window - self.stride).abs() > 1e-12 {
            return Err(Error::config("streaming requires stride == bin window"));
        }
        Ok(())
    }
}

/// Receives per-layer activity during a forward pass.
pub trait ForwardObserver {
    fn layer(&mut self, index: usize, n_in: usize, active_in: usize, n_out: usize);
}

impl ForwardObserver for () {
    fn layer(&mut self, _: usize, _: usize, _: usize, _: usize) {}
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<T> {
    pub out_spikes: SpikeBinVector,
    pub out_membrane: Vec<T>,
    /// Spikes of every hidden layer, input side first.
    pub hidden_spikes: Vec<SpikeBinVector>,
}

impl<T> ForwardOutput<T> {
    /// Spikes feeding the output layer.
    pub fn last_hidden(&self) -> Option<&SpikeBinVector> {
        self.hidden_spikes.last()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepSnn<T> {
    layers: Vec<LifLayer<T>>,
}

impl<T: Real> DeepSnn<T> {
    pub fn from_layers(layers: Vec<LifLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::config(format!(
                    "layer output width {} does not feed next layer input {}",
                    pair[0].n_out(),
                    pair[1].n_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero weights.
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let layers = (0..cfg.depth())
            .map(|i| LifLayer::zeros(cfg.layer_sizes[i], cfg.layer_sizes[i + 1], cfg.lif_for(i).cast()))
            .collect();
        Self::from_layers(layers)
    }

    /// Weights drawn from `U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    pub fn init<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(cfg)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.n_in() as f64).sqrt();
            for w in layer.weights_mut() {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LifLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LifLayer<T>] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in()).chain(self.layers.iter().map(|l| l.n_out())).collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    pub fn output_layer(&self) -> &LifLayer<T> {
        &self.layers[self.layers.len() - 1]
    }

    pub fn output_layer_mut(&mut self) -> &mut LifLayer<T> {
        let k = self.layers.len() - 1;
        &mut self.layers[k]
    }

    pub fn forward(&mut self, input: &SpikeBinVector) -> Result<ForwardOutput<T>> {
        self.forward_observed(input, &mut ())
    }

    /// Chains the layers for one bin. No dropout and no randomness.
    pub fn forward_observed<O: ForwardObserver + ?Sized>(
        &mut self,
        input: &SpikeBinVector,
        observer: &mut O,
    ) -> Result<ForwardOutput<T>> {
        if input.len() != self.n_inputs() {
            return Err(Error::config(format!(
                "network expects {} input channels, got {}",
                self.n_inputs(),
                input.len()
            )));
        }
        let mut active = input.active_indices();
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            observer.layer(i, layer.n_in(), active.len(), layer.n_out());
            layer.step_active(&active);
            if i < last {
                hidden.push(SpikeBinVector::from_bits(layer.spikes().to_vec()));
                active = layer.spikes().iter().enumerate().filter_map(|(j, &s)| s.then_some(j)).collect();
            }
        }
        let out = &self.layers[last];
        Ok(ForwardOutput {
            out_spikes: SpikeBinVector::from_bits(out.spikes().to_vec()),
            out_membrane: out.membrane().to_vec(),
            hidden_spikes: hidden,
        })
    }

    /// Zeroes all membranes and last-step spikes.
    pub fn reset_states(&mut self) {
        self.layers.iter_mut().for_each(LifLayer::reset);
    }

    /// Rounds every weight through `f32`, the checkpoint precision.
    pub fn round_to_storage(&mut self) {
        for layer in &mut self.layers {
            for w in layer.weights_mut() {
                *w = T::of(w.as_f64() as f32 as f64);
            }
        }
    }

    /// Order-sensitive digest of the weights of `layers[range]`.
    pub fn weight_checksum(&self, range: std::ops::Range<usize>) -> u64 {
        // FNV-1a over the bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for layer in &self.layers[range] {
            for w in layer.weights() {
                for b in w.as_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    pub fn cast<U: Real>(&self) -> DeepSnn<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = l.weights().iter().map(|&w| U::of(w.as_f64())).collect();
                LifLayer::with_weights(l.n_in(), l.n_out(), w, l.params().cast()).expect("dimensions preserved")
            })
            .collect();
        DeepSnn { layers }
    }
}
