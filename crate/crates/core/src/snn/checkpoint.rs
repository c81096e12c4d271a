//! Weight container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      4 bytes  "SNNW"
//! version    u16      1
//! n_sizes    u16      k + 1
//! sizes      u32 x (k + 1)      N0 .. Nk
//! weights    f32 x (Ni * Ni-1)  per layer, row-major [Ni x Ni-1]
//! lif        (f64 beta, f64 u_thr) per layer
//! ```

use std::io::{Read, Write};

use super::{DeepSnn, LifLayer, LifParams};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::num::Real;

pub const MAGIC: &[u8; 4] = b"SNNW";
pub const VERSION: u16 = 1;

impl<T: Real> DeepSnn<T> {
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ByteWriter::new(w);
        out.bytes(MAGIC)?;
        out.u16(VERSION)?;
        let sizes = self.layer_sizes();
        out.u16(sizes.len() as u16)?;
        for &n in &sizes {
            out.u32(n as u32)?;
        }
        for layer in self.layers() {
            for &w in layer.weights() {
                out.f32(w.as_f64() as f32)?;
            }
        }
        for layer in self.layers() {
            out.f64(layer.params().beta.as_f64())?;
            out.f64(layer.params().u_thr.as_f64())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut inp = ByteReader::new(r);
        let magic: [u8; 4] = inp.array("magic")?;
        if &magic != MAGIC {
            return Err(Error::Parse { offset: 0, msg: "bad magic, not a weight container".into() });
        }
        let version = inp.u16("version")?;
        if version != VERSION {
            return Err(inp.parse_error(format!("unsupported version {version}")));
        }
        let n_sizes = inp.u16("layer count")? as usize;
        if n_sizes < 2 {
            return Err(inp.parse_error("need at least two layer sizes"));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            let n = inp.u32("layer size")? as usize;
            if n == 0 {
                return Err(inp.parse_error("zero layer size"));
            }
            sizes.push(n);
        }
        let mut weights = Vec::with_capacity(n_sizes - 1);
        for i in 1..n_sizes {
            let count = sizes[i]
                .checked_mul(sizes[i - 1])
                .ok_or_else(|| inp.parse_error("layer size overflow"))?;
            let mut w = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                w.push(T::of(inp.f32("weight")? as f64));
            }
            weights.push(w);
        }
        let mut layers = Vec::with_capacity(n_sizes - 1);
        for (i, w) in weights.into_iter().enumerate() {
            let at = inp.offset();
            let beta = inp.f64("beta")?;
            let u_thr = inp.f64("threshold")?;
            let params = LifParams::new(T::of(beta), T::of(u_thr))
                .map_err(|e| Error::Parse { offset: at, msg: e.to_string() })?;
            layers.push(LifLayer::with_weights(sizes[i], sizes[i + 1], w, params)?);
        }
        inp.expect_eof()?;
        DeepSnn::from_layers(layers)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::NetworkConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> DeepSnn<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut n = DeepSnn::init(&NetworkConfig::closed_loop(), &mut rng).unwrap();
        n.round_to_storage();
        n
    }

    #[test]
    fn round_trip_after_storage_rounding_is_exact() {
        let n = net();
        let back = DeepSnn::<f64>::read_from(&n.to_bytes()[..]).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn header_layout() {
        let b = net().to_bytes();
        assert_eq!(&b[..4], b"SNNW");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u16::from_le_bytes([b[6], b[7]]), 4);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 46);
        let weights = 46 * 65 + 65 * 40 + 40 * 8;
        assert_eq!(b.len(), 8 + 4 * 4 + 4 * weights + 3 * 16);
    }

    #[test]
    fn truncation_reports_offset() {
        let b = net().to_bytes();
        match DeepSnn::<f64>::read_from(&b[..100]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 100),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(DeepSnn::<f64>::read_from(&b"XXXX"[..]), Err(Error::Parse { .. })));
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(DeepSnn::<f64>::read_from(&extra[..]), Err(Error::Parse { .. })));
    }
}
