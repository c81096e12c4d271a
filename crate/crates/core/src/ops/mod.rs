//! Closed-loop world: cosine-tuned brain model, center-out task and
//! perturbations.

mod brain;
mod perturb;
mod task;

pub use brain::{ops_generate, OpsBrain, OpsParams};
pub use perturb::{apply_perturbation, PerturbationKind, PerturbationSpec};
pub use task::{
    intended_direction, CenterOutEnv, EnvConfig, HoldPolicy, StepOutcome, TrajectoryPoint, TrialRecord, TrialStatus,
};
