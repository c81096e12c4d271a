//! Spiking intention decoder with online bandit and attention-gated
//! calibration, a simulated closed-loop reaching environment and an
//! operation/memory cost model.
//!
//! The numeric core is generic over the scalar type; the aliases below fix
//! it to `f64` (or `f32` where noted) for everyday use.

pub mod binio;
pub mod codec;
pub mod error;
pub mod learning;
pub mod metrics;
pub mod num;
pub mod ops;
pub mod sim;
pub mod snn;

pub use error::{Error, Result};
pub use num::{Count, Exact, Real};

pub type Network = snn::DeepSnn<f64>;
pub type Network32 = snn::DeepSnn<f32>;
pub type Layer = snn::LifLayer<f64>;
pub type Lif = snn::LifParams<f64>;
pub type Quantizer = codec::AxisQuantizer<f64>;
pub type Codec = codec::VelocityCodec<f64>;
pub type ExactCost = metrics::ForwardCost<Exact>;
