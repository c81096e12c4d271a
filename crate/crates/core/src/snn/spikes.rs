use serde::{Deserialize, Serialize};

/// Binary spike presence per channel for one time bin.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikeBinVector {
    bits: Vec<bool>,
}

impl SpikeBinVector {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Accepts any integer-like slice; nonzero means spike.
    pub fn from_u8(bits: &[u8]) -> Self {
        Self { bits: bits.iter().map(|&b| b != 0).collect() }
    }

    pub fn from_active(n: usize, active: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in active {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active().collect()
    }

    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of silent channels.
    pub fn sparsity(&self) -> f64 {
        if self.bits.is_empty() {
            return 1.0;
        }
        1.0 - self.count_active() as f64 / self.bits.len() as f64
    }
}

impl From<Vec<bool>> for SpikeBinVector {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}
