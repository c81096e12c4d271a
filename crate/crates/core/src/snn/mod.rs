//! Leaky integrate-and-fire layers with subtractive reset and the streaming
//! fully connected spiking network built from them.
//!
//! Each bin advances every layer once:
//!
//! ```text
//! U[t] = beta * U[t-1] + W X[t] - S[t-1] * theta,   theta = U_thr
//! S[t] = 1 if U[t] > U_thr else 0
//! ```

mod checkpoint;
mod layer;
mod network;
mod spikes;

pub use checkpoint::{MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use layer::{lif_step, LifLayer, LifParams};
pub use network::{DeepSnn, ForwardObserver, ForwardOutput, NetworkConfig};
pub use spikes::SpikeBinVector;
