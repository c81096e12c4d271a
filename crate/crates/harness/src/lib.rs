//! Experiment orchestration for the spiking decoder: configuration, SPKD
//! datasets and their synthetic generator, open-loop streaming evaluation,
//! closed-loop runs and sweeps, and result files.

pub mod closed_loop;
pub mod config;
pub mod dataset;
pub mod error;
pub mod open_loop;
pub mod output;
pub mod report;
pub mod synth;

pub use config::{ExperimentConfig, Mode};
pub use dataset::{ingest_dataset, SpikeDataset};
pub use error::{HarnessError, Result};
pub use synth::{synth_dataset, synth_dataset_with, SynthConfig};
