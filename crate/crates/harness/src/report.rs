//! Resource tables: analytic costs per decoder variant, and measured
//! per-step costs from closed-loop runs.

use serde::{Deserialize, Serialize};
use spikebmi_core::learning::LearnerKind;
use spikebmi_core::metrics::{
    agrel_backward_cost, banditron_backward_cost, clsnn_backward_estimate, footprint_bits, footprint_kb, forward_cost,
    LayerKind, SparsityProfile,
};

use crate::closed_loop::PhaseSummary;
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Fraction of silent inputs per layer.
    pub activity_sparsity: f64,
    /// Fraction of zero feedback entries (hidden layers).
    pub feedback_sparsity: f64,
    pub error_sparsity: f64,
    /// Use the one-hot winner sparsity `1 - 1/N` for output feedback.
    pub one_hot_output: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { activity_sparsity: 0.6, feedback_sparsity: 0.94, error_sparsity: 0.6, one_hot_output: true }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        for v in [self.activity_sparsity, self.feedback_sparsity, self.error_sparsity] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HarnessError::config("report sparsities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub model: String,
    pub footprint_kb: f64,
    pub fwd_macs: f64,
    pub fwd_acs: f64,
    pub fwd_mem_access: f64,
    pub bwd_macs: f64,
    pub bwd_mem_access: f64,
}

/// Analytic per-step costs for the fixed, Banditron and AGREL decoders of
/// shape `sizes`, plus the full-backprop estimate for comparison.
pub fn cost_table(sizes: &[usize], rc: &ReportConfig) -> Result<Vec<CostRow>> {
    rc.validate()?;
    let k = sizes.len().saturating_sub(1);
    let s = rc.activity_sparsity;
    let fwd = forward_cost::<f64>(sizes, &vec![s; k], LayerKind::Snn, 1)?;
    let kb = footprint_kb::<f64>(footprint_bits(sizes, LayerKind::Snn));
    let n_out = sizes[k];
    let bandit = banditron_backward_cost::<f64>(sizes[k - 1], s, 2);
    let mut profile = SparsityProfile::uniform(k, s, rc.feedback_sparsity, rc.error_sparsity);
    if rc.one_hot_output {
        profile = profile.with_one_hot_output(n_out);
    }
    let agrel = agrel_backward_cost(sizes, &profile)?;
    let clsnn = clsnn_backward_estimate::<f64>(sizes);
    let row = |model: &str, b_mac: f64, b_ma: f64| CostRow {
        model: model.to_string(),
        footprint_kb: kb,
        fwd_macs: fwd.macs,
        fwd_acs: fwd.acs,
        fwd_mem_access: fwd.mem_access,
        bwd_macs: b_mac,
        bwd_mem_access: b_ma,
    };
    Ok(vec![
        row(LearnerKind::None.label(), 0.0, 0.0),
        row(LearnerKind::Banditron.label(), bandit.macs, bandit.mem_access),
        row(LearnerKind::Agrel.label(), agrel.macs(), agrel.mem_access()),
        row("full_backprop_estimate", clsnn.macs, clsnn.mem_access),
    ])
}

/// Per-step costs observed in closed-loop runs.
pub fn measured_table(summaries: &[PhaseSummary], footprint_kb: f64) -> Vec<CostRow> {
    summaries
        .iter()
        .map(|s| CostRow {
            model: s.learner.label().to_string(),
            footprint_kb,
            fwd_macs: s.fwd_macs_per_step,
            fwd_acs: s.fwd_acs_per_step,
            fwd_mem_access: s.fwd_mem_per_step,
            bwd_macs: s.bwd_macs_per_step,
            bwd_mem_access: s.bwd_mem_per_step,
        })
        .collect()
}

pub fn cost_csv(rows: &[CostRow]) -> String {
    let mut s = String::from("model,footprint_kb,fwd_macs,fwd_acs,fwd_mem_access,bwd_macs,bwd_mem_access\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.3},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            r.model, r.footprint_kb, r.fwd_macs, r.fwd_acs, r.fwd_mem_access, r.bwd_macs, r.bwd_mem_access
        ));
    }
    s
}
