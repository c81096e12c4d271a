//! SPKD spike dataset container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic         4 bytes  "SPKD"
//! version       u16      1
//! n_channels    u32
//! bin_width_us  u32
//! n_bins        u64
//! n_sessions    u32
//! offsets       u64 x n_sessions   first bin of each session
//! per bin:      ceil(n_channels / 8) mask bytes (channel c = bit c % 8 of
//!               byte c / 8), then f32 vx, f32 vy
//! ```
//!
//! Recordings binned elsewhere convert by emitting one mask per bin plus
//! the velocity sampled at the bin end; for the usual 96-channel array with
//! 4 ms bins that is `n_channels = 96`, `bin_width_us = 4000`, and one
//! session per recording day in chronological order.
//! [`SpikeDataset::push_recording`] does this from raw spike times.

use std::io::Write;
use std::path::Path;

use spikebmi_core::binio::{ByteReader, ByteWriter};
use spikebmi_core::snn::SpikeBinVector;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"SPKD";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SpikeDataset {
    pub n_channels: usize,
    pub bin_width_us: u32,
    pub bins: Vec<SpikeBinVector>,
    /// Velocity per bin; stored as `f32`.
    pub velocities: Vec<[f64; 2]>,
    /// First bin of each session, ascending, starting at 0.
    pub session_starts: Vec<usize>,
}

/// Borrowed view of one session.
#[derive(Clone, Copy, Debug)]
pub struct Session<'a> {
    pub bins: &'a [SpikeBinVector],
    pub velocities: &'a [[f64; 2]],
}

impl Session<'_> {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

fn mask_bytes(n_channels: usize) -> usize {
    n_channels.div_ceil(8)
}

impl SpikeDataset {
    pub fn new(n_channels: usize, bin_width_us: u32) -> Self {
        Self { n_channels, bin_width_us, bins: Vec::new(), velocities: Vec::new(), session_starts: Vec::new() }
    }

    /// Appends a session. Velocities are rounded to `f32` so that the
    /// in-memory dataset equals its serialised form.
    pub fn push_session(&mut self, bins: Vec<SpikeBinVector>, velocities: Vec<[f64; 2]>) -> Result<()> {
        if bins.len() != velocities.len() || bins.is_empty() {
            return Err(HarnessError::data("session needs equally many (>= 1) bins and velocities"));
        }
        if let Some(b) = bins.iter().find(|b| b.len() != self.n_channels) {
            return Err(HarnessError::data(format!("bin has {} channels, dataset has {}", b.len(), self.n_channels)));
        }
        self.session_starts.push(self.bins.len());
        self.bins.extend(bins);
        self.velocities.extend(velocities.into_iter().map(|[x, y]| [x as f32 as f64, y as f32 as f64]));
        Ok(())
    }

    /// Bins one raw recording into a session. `spike_times[c]` holds the
    /// sorted event times (s) of channel `c`, relative to the first
    /// kinematic sample; `velocity[i]` is sampled at `i / label_hz`. Each
    /// bin `[kW, (k+1)W)` is labelled with the last sample at or before its
    /// end; bins past the last sample are dropped.
    pub fn push_recording(&mut self, spike_times: &[Vec<f64>], velocity: &[[f64; 2]], label_hz: f64) -> Result<()> {
        if spike_times.len() != self.n_channels {
            return Err(HarnessError::data(format!(
                "recording has {} channels, dataset has {}",
                spike_times.len(),
                self.n_channels
            )));
        }
        if !(label_hz > 0.0) || self.bin_width_us == 0 {
            return Err(HarnessError::data("label rate and bin width must be positive"));
        }
        let w = self.bin_width_s();
        let mut cursor = vec![0usize; self.n_channels];
        let (mut bins, mut labels) = (Vec::new(), Vec::new());
        for k in 0.. {
            let end = (k + 1) as f64 * w;
            let sample = (end * label_hz + 1e-9).floor() as usize;
            if sample >= velocity.len() {
                break;
            }
            let mut bits = vec![false; self.n_channels];
            for (c, times) in spike_times.iter().enumerate() {
                while cursor[c] < times.len() && times[cursor[c]] < end {
                    bits[c] |= times[cursor[c]] >= k as f64 * w;
                    cursor[c] += 1;
                }
            }
            bins.push(SpikeBinVector::from_bits(bits));
            labels.push(velocity[sample]);
        }
        self.push_session(bins, labels)
    }

    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_us as f64 * 1e-6
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn n_sessions(&self) -> usize {
        self.session_starts.len()
    }

    pub fn session(&self, i: usize) -> Session<'_> {
        let a = self.session_starts[i];
        let b = self.session_starts.get(i + 1).copied().unwrap_or(self.bins.len());
        Session { bins: &self.bins[a..b], velocities: &self.velocities[a..b] }
    }

    pub fn sessions(&self) -> impl Iterator<Item = Session<'_>> {
        (0..self.n_sessions()).map(|i| self.session(i))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.bin_width_us == 0 {
            return Err(HarnessError::data("dataset needs channels and a positive bin width"));
        }
        if self.bins.len() != self.velocities.len() {
            return Err(HarnessError::data("spike and velocity streams differ in length"));
        }
        if self.bins.iter().any(|b| b.len() != self.n_channels) {
            return Err(HarnessError::data("bin width in channels differs from the header"));
        }
        if self.velocities.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HarnessError::data("non-finite velocity"));
        }
        match self.session_starts.first() {
            None if self.bins.is_empty() => {}
            Some(0) => {}
            _ => return Err(HarnessError::data("first session must start at bin 0")),
        }
        for w in self.session_starts.windows(2) {
            if w[1] <= w[0] {
                return Err(HarnessError::data("session offsets must be strictly increasing"));
            }
        }
        if self.session_starts.last().is_some_and(|&s| s >= self.bins.len()) {
            return Err(HarnessError::data("last session is empty"));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        self.validate()?;
        let mut out = ByteWriter::new(w);
        out.bytes(MAGIC)?;
        out.u16(VERSION)?;
        out.u32(self.n_channels as u32)?;
        out.u32(self.bin_width_us)?;
        out.u64(self.bins.len() as u64)?;
        out.u32(self.session_starts.len() as u32)?;
        for &s in &self.session_starts {
            out.u64(s as u64)?;
        }
        let mut mask = vec![0u8; mask_bytes(self.n_channels)];
        for (b, v) in self.bins.iter().zip(&self.velocities) {
            mask.iter_mut().for_each(|m| *m = 0);
            for c in b.active() {
                mask[c / 8] |= 1 << (c % 8);
            }
            out.bytes(&mask)?;
            out.f32(v[0] as f32)?;
            out.f32(v[1] as f32)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut inp = ByteReader::new(data);
        let magic: [u8; 4] = inp.array("magic")?;
        if &magic != MAGIC {
            return Err(spikebmi_core::Error::Parse { offset: 0, msg: "bad magic, not an SPKD file".into() }.into());
        }
        let version = inp.u16("version")?;
        if version != VERSION {
            return Err(inp.parse_error(format!("unsupported SPKD version {version}")).into());
        }
        let n_channels = inp.u32("channel count")? as usize;
        let bin_width_us = inp.u32("bin width")?;
        let n_bins = inp.u64("bin count")?;
        let n_sessions = inp.u32("session count")? as u64;
        if n_sessions > n_bins.max(1) {
            return Err(inp.parse_error(format!("{n_sessions} sessions for {n_bins} bins")).into());
        }
        let mut starts = Vec::with_capacity(n_sessions as usize);
        for _ in 0..n_sessions {
            starts.push(inp.u64("session offset")? as usize);
        }
        let header = inp.offset() as usize;
        let payload = &data[header..];
        let stride = mask_bytes(n_channels) + 8;
        let expected = (n_bins as u128) * stride as u128;
        if payload.len() as u128 != expected {
            if n_bins > 0 && payload.len() as u64 % n_bins == 0 && payload.len() as u64 / n_bins > 8 {
                let per_bin = payload.len() as u64 / n_bins - 8;
                return Err(HarnessError::data(format!(
                    "header declares {n_channels} channels ({} mask bytes per bin) but payload holds {per_bin}",
                    mask_bytes(n_channels)
                )));
            }
            let offset = if (payload.len() as u128) < expected { data.len() } else { header + expected as usize };
            return Err(spikebmi_core::Error::Parse {
                offset: offset as u64,
                msg: format!("payload is {} bytes, header implies {expected}", payload.len()),
            }
            .into());
        }
        let n_bins = n_bins as usize;
        let mb = mask_bytes(n_channels);
        let mut bins = Vec::with_capacity(n_bins);
        let mut velocities = Vec::with_capacity(n_bins);
        for (i, rec) in payload.chunks_exact(stride).enumerate() {
            let mask = &rec[..mb];
            if n_channels % 8 != 0 && mask[mb - 1] >> (n_channels % 8) != 0 {
                return Err(HarnessError::data(format!("bin {i} sets bits beyond channel {n_channels}")));
            }
            bins.push(SpikeBinVector::from_bits((0..n_channels).map(|c| mask[c / 8] >> (c % 8) & 1 == 1).collect()));
            let f = |k: usize| f32::from_le_bytes(rec[mb + 4 * k..mb + 4 * k + 4].try_into().expect("4 bytes")) as f64;
            velocities.push([f(0), f(1)]);
        }
        let ds = SpikeDataset { n_channels, bin_width_us, bins, velocities, session_starts: starts };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
    }
}

/// Reads and validates an SPKD file.
pub fn ingest_dataset(path: impl AsRef<Path>) -> Result<SpikeDataset> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| HarnessError::data(format!("cannot read {}: {e}", path.display())))?;
    SpikeDataset::from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SpikeDataset {
        let mut ds = SpikeDataset::new(11, 4000);
        let bins = |k: usize| (0..k).map(|i| SpikeBinVector::from_active(11, &[i % 11, (3 * i) % 11])).collect::<Vec<_>>();
        ds.push_session(bins(5), (0..5).map(|i| [i as f64 * 0.1, -0.3]).collect()).unwrap();
        ds.push_session(bins(3), (0..3).map(|i| [0.7, i as f64]).collect()).unwrap();
        ds
    }

    #[test]
    fn recording_is_binned_with_end_of_bin_labels() {
        let mut ds = SpikeDataset::new(2, 4000);
        // 250 Hz labels: sample i sits at 4i ms
        let vel: Vec<[f64; 2]> = (0..4).map(|i| [i as f64, -(i as f64)]).collect();
        let spikes = vec![vec![0.0, 0.0039, 0.009], vec![0.004, 0.0121]];
        ds.push_recording(&spikes, &vel, 250.0).unwrap();
        let s = ds.session(0);
        assert_eq!(s.len(), 3);
        let masks: Vec<Vec<bool>> = s.bins.iter().map(|b| b.bits().to_vec()).collect();
        assert_eq!(masks, vec![vec![true, false], vec![false, true], vec![true, false]]);
        assert_eq!(s.velocities, &[[1.0, -1.0], [2.0, -2.0], [3.0, -3.0]]);
        assert!(ds.push_recording(&spikes[..1], &vel, 250.0).is_err());
    }

    #[test]
    fn round_trip() {
        let ds = small();
        let back = SpikeDataset::from_bytes(&ds.to_bytes().unwrap()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.session(1).len(), 3);
        assert!((back.bin_width_s() - 0.004).abs() < 1e-15);
    }

    #[test]
    fn every_truncation_is_a_data_error() {
        let bytes = small().to_bytes().unwrap();
        for cut in 0..bytes.len() {
            match SpikeDataset::from_bytes(&bytes[..cut]) {
                Err(HarnessError::Core(spikebmi_core::Error::Parse { offset, .. })) => assert!(offset as usize <= cut),
                // a cut that leaves a whole number of narrower bins reads as a channel mismatch
                Err(e @ HarnessError::Data(_)) => assert_eq!(e.exit_code(), 3),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn channel_mismatch_is_a_validation_error() {
        let mut bytes = small().to_bytes().unwrap();
        // claim 30 channels (4 mask bytes) over a payload written with 2
        bytes[6..10].copy_from_slice(&30u32.to_le_bytes());
        let err = SpikeDataset::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, HarnessError::Data(_)), "{err:?}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn bad_magic_and_padding_bits() {
        let mut bytes = small().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(SpikeDataset::from_bytes(&bytes).is_err());
        let mut bytes = small().to_bytes().unwrap();
        let header = 4 + 2 + 4 + 4 + 8 + 4 + 2 * 8;
        bytes[header + 1] |= 0x80;
        assert!(matches!(SpikeDataset::from_bytes(&bytes), Err(HarnessError::Data(_))));
    }

    #[test]
    fn bad_session_offsets_rejected() {
        let mut ds = small();
        ds.session_starts = vec![0, 8];
        assert!(ds.validate().is_err());
        ds.session_starts = vec![1, 4];
        assert!(ds.validate().is_err());
    }
}
