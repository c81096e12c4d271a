//! Offline supervised pretraining.
//!
//! Streams each labelled sequence bin by bin (state reset at sequence
//! start), applies dropout after hidden layers, and minimises the summed
//! per-axis cross-entropy of the output membrane potentials. Gradients are
//! computed online at every bin: the spatial path uses a surrogate
//! derivative for the spike nonlinearity, and the dependence of each
//! membrane on past inputs is carried by a per-layer eligibility trace
//! `e[t] = beta * e[t-1] + x[t]` instead of unrolling through time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::ClassLabelPair;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::snn::{DeepSnn, SpikeBinVector};

use super::AXES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    /// `1 / (1 + (pi x)^2)` around the threshold.
    Arctan,
    /// `dS/dU = 1`.
    StraightThrough,
}

impl Surrogate {
    #[inline]
    fn grad<T: Real>(self, centered: T) -> T {
        match self {
            Surrogate::Arctan => {
                let z = T::PI() * centered;
                T::one() / (T::one() + z * z)
            }
            Surrogate::StraightThrough => T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Bins per optimiser step.
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    pub surrogate: Surrogate,
    /// Dropout after each hidden layer.
    pub dropout: f64,
    pub seed: u64,
}

impl PretrainConfig {
    /// Open-loop recipe: 50 epochs, lr 0.01, batch 512, arctan.
    pub fn open_loop() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 512,
            optimizer: AdamWConfig::default(),
            surrogate: Surrogate::Arctan,
            dropout: 0.1,
            seed: 0,
        }
    }

    /// Closed-loop first stage: as open-loop with lr 0.005, 5 epochs.
    pub fn closed_loop_stage1() -> Self {
        Self { epochs: 5, learning_rate: 0.005, dropout: 0.3, ..Self::open_loop() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("pretraining needs at least one epoch"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::config("learning rate must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A contiguous labelled stream; decoder state is reset at its start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSequence {
    pub inputs: Vec<SpikeBinVector>,
    pub labels: Vec<ClassLabelPair>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, x: SpikeBinVector, y: ClassLabelPair) {
        self.inputs.push(x);
        self.labels.push(y);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-bin loss (sum over axes).
    pub loss: f64,
    /// Fraction of per-axis predictions matching the label.
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epochs: Vec<EpochStats>,
}

impl PretrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.loss)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.accuracy)
    }
}

struct AdamW<T> {
    cfg: AdamWConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Real> AdamW<T> {
    fn new(cfg: AdamWConfig, shapes: &[usize]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut DeepSnn<T>, grads: &[Vec<T>], scale: T, lr: f64) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = T::of(1.0 - b1.powi(self.t));
        let bc2 = T::of(1.0 - b2.powi(self.t));
        let (b1, b2) = (T::of(b1), T::of(b2));
        let (one, eps) = (T::one(), T::of(self.cfg.eps));
        let lr_t = T::of(lr);
        let decay = T::of(1.0 - lr * self.cfg.weight_decay);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            for (i, w) in layer.weights_mut().iter_mut().enumerate() {
                let g = grads[l][i] * scale;
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                *w = *w * decay - lr_t * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Trains `net` in place. Membrane logits are split into `AXES` blocks of
/// equal width.
pub fn pretrain<T: Real>(
    net: &mut DeepSnn<T>,
    data: &[LabeledSequence],
    cfg: &PretrainConfig,
) -> Result<PretrainReport> {
    cfg.validate()?;
    let total: usize = data.iter().map(LabeledSequence::len).sum();
    if total == 0 {
        return Err(Error::argument("pretraining dataset is empty"));
    }
    let sizes = net.layer_sizes();
    let k = net.depth();
    let n_out = sizes[k];
    if n_out % AXES != 0 {
        return Err(Error::config("output layer must split evenly across axes"));
    }
    let n_classes = n_out / AXES;
    for seq in data {
        if seq.inputs.len() != seq.labels.len() {
            return Err(Error::argument("sequence inputs and labels differ in length"));
        }
        for (x, y) in seq.inputs.iter().zip(&seq.labels) {
            if x.len() != sizes[0] {
                return Err(Error::config(format!("sample has {} channels, network expects {}", x.len(), sizes[0])));
            }
            if y.x >= n_classes || y.y >= n_classes {
                return Err(Error::argument("label outside the class range"));
            }
        }
    }

    let shapes: Vec<usize> = (0..k).map(|i| sizes[i] * sizes[i + 1]).collect();
    let mut grads: Vec<Vec<T>> = shapes.iter().map(|&n| vec![T::zero(); n]).collect();
    let mut opt = AdamW::new(cfg.optimizer, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let keep = 1.0 - cfg.dropout;
    let mask_scale = T::of(1.0 / keep);

    // per-layer scratch
    let mut traces: Vec<Vec<T>> = (0..k).map(|i| vec![T::zero(); sizes[i]]).collect();
    let mut acts: Vec<Vec<T>> = (0..=k).map(|i| vec![T::zero(); sizes[i]]).collect();
    let mut masks: Vec<Vec<T>> = (0..=k).map(|i| vec![T::one(); sizes[i]]).collect();
    let mut deltas: Vec<Vec<T>> = (0..=k).map(|i| vec![T::zero(); sizes[i]]).collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = PretrainReport::default();
    let mut global_step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0f64, 0usize, 0usize);
        let mut in_batch = 0usize;

        for &si in &order {
            let seq = &data[si];
            net.reset_states();
            traces.iter_mut().for_each(|t| t.iter_mut().for_each(|v| *v = T::zero()));

            for (x, label) in seq.inputs.iter().zip(&seq.labels) {
                // forward (training mode)
                for (a, &b) in acts[0].iter_mut().zip(x.bits()) {
                    *a = if b { T::one() } else { T::zero() };
                }
                for l in 0..k {
                    let beta = net.layers()[l].params().beta;
                    for (e, &a) in traces[l].iter_mut().zip(&acts[l]) {
                        *e = beta * *e + a;
                    }
                    let (lower, upper) = acts.split_at_mut(l + 1);
                    let layer = &mut net.layers_mut()[l];
                    layer.step_dense(&lower[l])?;
                    let hidden = l + 1 < k;
                    for (j, &s) in layer.spikes().iter().enumerate() {
                        let m = if hidden && cfg.dropout > 0.0 {
                            if rng.random::<f64>() < keep {
                                mask_scale
                            } else {
                                T::zero()
                            }
                        } else {
                            T::one()
                        };
                        masks[l + 1][j] = m;
                        upper[0][j] = if s { m } else { T::zero() };
                    }
                }

                // loss and output error per axis block
                let out = net.layers()[k - 1].membrane();
                let mut step_loss = 0.0f64;
                for axis in 0..AXES {
                    let lo = axis * n_classes;
                    let block = &out[lo..lo + n_classes];
                    let y = label.axis(axis);
                    let mx = block.iter().copied().fold(T::neg_infinity(), T::max);
                    let exps: Vec<T> = block.iter().map(|&u| (u - mx).exp()).collect();
                    let z: T = exps.iter().copied().sum();
                    step_loss += (z.ln() + mx - block[y]).as_f64();
                    for c in 0..n_classes {
                        let p = exps[c] / z;
                        deltas[k][lo + c] = if c == y { p - T::one() } else { p };
                    }
                    if super::predict_class(block) == y {
                        correct += 1;
                    }
                }
                if !step_loss.is_finite() {
                    return Err(Error::Divergence { epoch, step: global_step, loss: step_loss });
                }
                loss_sum += step_loss;
                seen += 1;

                // backward through the layers at this bin
                for l in (0..k).rev() {
                    let n_in = sizes[l];
                    {
                        let g = &mut grads[l];
                        let d = &deltas[l + 1];
                        let e = &traces[l];
                        for (r, &dr) in d.iter().enumerate() {
                            if dr == T::zero() {
                                continue;
                            }
                            let row = &mut g[r * n_in..(r + 1) * n_in];
                            for (gc, &ec) in row.iter_mut().zip(e) {
                                *gc += dr * ec;
                            }
                        }
                    }
                    if l == 0 {
                        break;
                    }
                    let layer = &net.layers()[l];
                    let below = &net.layers()[l - 1];
                    let thr = below.params().u_thr;
                    let (lower, upper) = deltas.split_at_mut(l + 1);
                    let d_up = &upper[0];
                    let d_here = &mut lower[l];
                    d_here.iter_mut().for_each(|v| *v = T::zero());
                    for (r, &dr) in d_up.iter().enumerate() {
                        if dr == T::zero() {
                            continue;
                        }
                        for (dj, &w) in d_here.iter_mut().zip(layer.row(r)) {
                            *dj += dr * w;
                        }
                    }
                    for (j, dj) in d_here.iter_mut().enumerate() {
                        let u = below.membrane()[j];
                        *dj = *dj * masks[l][j] * cfg.surrogate.grad(u - thr);
                    }
                }

                in_batch += 1;
                global_step += 1;
                if in_batch == cfg.batch_size {
                    opt.step(net, &grads, T::one() / T::of_usize(in_batch), cfg.learning_rate);
                    grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = T::zero()));
                    in_batch = 0;
                }
            }
        }
        if in_batch > 0 {
            opt.step(net, &grads, T::one() / T::of_usize(in_batch), cfg.learning_rate);
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = T::zero()));
        }
        report.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / seen as f64,
            accuracy: correct as f64 / (seen * AXES) as f64,
        });
    }
    net.reset_states();
    Ok(report)
}
