//! Accuracy metrics, the analytic cost model and live operation counters.

mod accuracy;
mod cost;
mod meter;

pub use accuracy::{aggregate_time_to_target, r_squared, r_squared_2d};
pub use cost::{
    agrel_backward_cost, banditron_backward_cost, clsnn_backward_estimate, egru_cost_estimate, footprint_bits,
    footprint_kb, footprint_kib, forward_cost, parameter_count, AgrelCost, BackwardCost, EgruCost, ForwardCost,
    LayerKind, SparsityProfile, PARAM_BITS,
};
pub use meter::{ForwardMeter, LayerTally, ResourceLedger};
