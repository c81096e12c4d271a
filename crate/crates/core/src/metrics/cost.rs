//! Analytic operation and memory model.
//!
//! `sizes = [N0, ..., Nk]`; sparsities are fractions of zero activations.
//! Everything is generic over [`Count`] so golden values can be checked in
//! exact rational arithmetic.

use crate::error::{Error, Result};
use crate::num::Count;

/// Bits per stored parameter.
pub const PARAM_BITS: u64 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Weights plus two state words (membrane, spike) per neuron.
    Snn,
    /// Weights plus one bias per neuron.
    Ann,
}

impl LayerKind {
    fn per_neuron(self) -> usize {
        match self {
            LayerKind::Snn => 2,
            LayerKind::Ann => 1,
        }
    }
}

fn c<T: Count>(n: usize) -> T {
    T::of_usize(n)
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::config("cost model needs at least one layer"));
    }
    Ok(())
}

/// Stored parameters (weights plus per-neuron words).
pub fn parameter_count(sizes: &[usize], kind: LayerKind) -> u64 {
    sizes.windows(2).map(|w| (w[0] * w[1] + kind.per_neuron() * w[1]) as u64).sum()
}

pub fn footprint_bits(sizes: &[usize], kind: LayerKind) -> u64 {
    parameter_count(sizes, kind) * PARAM_BITS
}

/// Footprint in kilobytes of 1000 bytes.
pub fn footprint_kb<T: Count>(bits: u64) -> T {
    c::<T>(bits as usize) / c::<T>(8000)
}

/// Footprint in kibibytes (1024 bytes).
pub fn footprint_kib<T: Count>(bits: u64) -> T {
    c::<T>(bits as usize) / c::<T>(8192)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCost<T> {
    pub macs: T,
    pub acs: T,
    pub mem_access: T,
}

/// Per-step forward cost. `input_sparsity[i]` is the sparsity of the input
/// to layer `i + 1` (so `s_0 .. s_{k-1}`).
pub fn forward_cost<T: Count>(
    sizes: &[usize],
    input_sparsity: &[T],
    kind: LayerKind,
    time_steps: usize,
) -> Result<ForwardCost<T>> {
    check_sizes(sizes)?;
    if input_sparsity.len() != sizes.len() - 1 {
        return Err(Error::config("need one input sparsity per layer"));
    }
    let ts = c::<T>(time_steps);
    let mut out = ForwardCost { macs: T::zero(), acs: T::zero(), mem_access: T::zero() };
    for (w, s) in sizes.windows(2).zip(input_sparsity) {
        let (n_prev, n) = (w[0], w[1]);
        let fetched = (T::one() - s.clone()) * c(n * n_prev);
        let ma = fetched.clone() + c(kind.per_neuron() * n);
        match kind {
            LayerKind::Snn => {
                out.macs = out.macs + c::<T>(n) * ts.clone();
                out.acs = out.acs + ma.clone() * ts.clone();
            }
            LayerKind::Ann => {
                out.macs = out.macs + fetched;
                out.acs = out.acs + ma.clone();
            }
        }
        out.mem_access = out.mem_access + ma;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackwardCost<T> {
    pub macs: T,
    pub mem_access: T,
}

/// Output-layer-only update touching the active inputs of each axis block.
pub fn banditron_backward_cost<T: Count>(n_in: usize, input_sparsity: T, axes: usize) -> BackwardCost<T> {
    let v = (T::one() - input_sparsity) * c(n_in * axes);
    BackwardCost { macs: v.clone(), mem_access: v }
}

/// Sparsities driving the attention-gated update cost. Vectors are indexed
/// by layer `i = 1..=k` at position `i - 1`, except `activity`, which holds
/// `s_0 .. s_{k-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityProfile<T> {
    pub activity: Vec<T>,
    pub feedback: Vec<T>,
    pub error: Vec<T>,
}

impl<T: Count> SparsityProfile<T> {
    pub fn uniform(depth: usize, s: T, s_fb: T, s_e: T) -> Self {
        Self { activity: vec![s; depth], feedback: vec![s_fb; depth], error: vec![s_e; depth] }
    }

    /// Replaces the output feedback sparsity with that of a single winner
    /// among `n_out` units.
    pub fn with_one_hot_output(mut self, n_out: usize) -> Self {
        if let Some(last) = self.feedback.last_mut() {
            *last = T::one() - T::one() / c(n_out);
        }
        self
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.activity.len() != depth || self.feedback.len() != depth || self.error.len() != depth {
            return Err(Error::config(format!("sparsity profile must have {depth} entries per kind")));
        }
        let (zero, one) = (T::zero(), T::one());
        for v in self.activity.iter().chain(&self.feedback).chain(&self.error) {
            if *v < zero || *v > one {
                return Err(Error::argument("sparsities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Components of the attention-gated update cost.
#[derive(Clone, Debug, PartialEq)]
pub struct AgrelCost<T> {
    pub mac_backward: T,
    pub mac_error: T,
    pub ma_backward: T,
    pub ma_feedback: T,
    pub ma_error: T,
}

impl<T: Count> AgrelCost<T> {
    /// Feedback gating needs no multiplications.
    pub fn macs(&self) -> T {
        self.mac_backward.clone() + self.mac_error.clone()
    }

    pub fn mem_access(&self) -> T {
        self.ma_backward.clone() + self.ma_feedback.clone() + self.ma_error.clone()
    }
}

/// Per-step cost of the attention-gated update:
/// weight writes `(1-s_{i-1})(1-s_fb_i) N_{i-1} N_i` on every layer, error
/// propagation `(1-s_fb_{i+1}) N_{i+1} N_i` and gated feedback reads
/// `(1-s_i)(1-s_e_i) N_i` on hidden layers.
pub fn agrel_backward_cost<T: Count>(sizes: &[usize], profile: &SparsityProfile<T>) -> Result<AgrelCost<T>> {
    check_sizes(sizes)?;
    let k = sizes.len() - 1;
    profile.validate(k)?;
    let one = T::one;
    let mut out = AgrelCost {
        mac_backward: T::zero(),
        mac_error: T::zero(),
        ma_backward: T::zero(),
        ma_feedback: T::zero(),
        ma_error: T::zero(),
    };
    for i in 1..=k {
        let w = (one() - profile.activity[i - 1].clone()) * (one() - profile.feedback[i - 1].clone()) * c(sizes[i - 1] * sizes[i]);
        out.mac_backward = out.mac_backward + w.clone();
        out.ma_backward = out.ma_backward + w;
        if i < k {
            let e = (one() - profile.feedback[i].clone()) * c(sizes[i + 1] * sizes[i]);
            out.mac_error = out.mac_error + e.clone();
            out.ma_error = out.ma_error + e;
            out.ma_feedback = out.ma_feedback
                + (one() - profile.activity[i].clone()) * (one() - profile.error[i - 1].clone()) * c(sizes[i]);
        }
    }
    Ok(out)
}

/// Dense eligibility-based update: two MACs and one access per weight.
pub fn clsnn_backward_estimate<T: Count>(sizes: &[usize]) -> BackwardCost<T> {
    let weights: usize = sizes.windows(2).map(|w| w[0] * w[1]).sum();
    BackwardCost { macs: c(2 * weights), mem_access: c(weights) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgruCost<T> {
    pub fwd_macs: T,
    pub bwd_macs: T,
    pub bwd_mem_access: T,
}

/// Gated recurrent cell: `3 [N_h (N_h + N_in) + 2 N_h]` forward, four MACs
/// and two accesses per changed parameter backward.
pub fn egru_cost_estimate<T: Count>(n_hidden: usize, n_in: usize, changed_params: usize) -> EgruCost<T> {
    EgruCost {
        fwd_macs: c(3 * (n_hidden * (n_hidden + n_in) + 2 * n_hidden)),
        bwd_macs: c(4 * changed_params),
        bwd_mem_access: c(2 * changed_params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{ratio, Exact};
    use proptest::prelude::*;

    const CL: [usize; 4] = [46, 65, 40, 8];

    #[test]
    fn footprint_small_cases() {
        assert_eq!(footprint_bits(&[1, 1], LayerKind::Snn), 96);
        assert_eq!(footprint_bits(&[1, 1], LayerKind::Ann), 64);
        assert_eq!(parameter_count(&CL, LayerKind::Snn), 6136);
    }

    #[test]
    fn silent_network_costs_only_state() {
        let f = forward_cost::<Exact>(&CL, &[Exact::from(1); 3], LayerKind::Snn, 1).unwrap();
        assert_eq!(f.mem_access, Exact::from(2 * (65 + 40 + 8)));
        let p = SparsityProfile::uniform(3, Exact::from(1), Exact::from(1), Exact::from(1));
        let a = agrel_backward_cost(&CL, &p).unwrap();
        assert_eq!(a.macs(), Exact::from(0));
        assert_eq!(a.mem_access(), Exact::from(0));
        assert_eq!(banditron_backward_cost(40, Exact::from(1), 2).macs, Exact::from(0));
    }

    #[test]
    fn one_hidden_layer_hand_expansion() {
        // [3, 4, 2], s0 = 1/2, s1 = 1/4, fb = (1/2, 1/2), e1 = 0
        let p = SparsityProfile {
            activity: vec![ratio(1, 2), ratio(1, 4)],
            feedback: vec![ratio(1, 2), ratio(1, 2)],
            error: vec![Exact::from(0), Exact::from(0)],
        };
        let a = agrel_backward_cost(&[3, 4, 2], &p).unwrap();
        // layer 1: 1/2 * 1/2 * 12 = 3; layer 2: 3/4 * 1/2 * 8 = 3
        assert_eq!(a.mac_backward, Exact::from(6));
        // error into layer 1: 1/2 * 2 * 4 = 4
        assert_eq!(a.mac_error, Exact::from(4));
        // feedback gate on layer 1: 3/4 * 1 * 4 = 3
        assert_eq!(a.ma_feedback, Exact::from(3));
        assert_eq!(a.mem_access(), Exact::from(13));
    }

    #[test]
    fn egru_and_clsnn_rules() {
        let e = egru_cost_estimate::<u64>(0, 10, 0);
        assert_eq!((e.fwd_macs, e.bwd_macs, e.bwd_mem_access), (0, 0, 0));
        let e = egru_cost_estimate::<u64>(5, 3, 7);
        assert_eq!(e.fwd_macs, 3 * (5 * 8 + 10));
        assert_eq!((e.bwd_macs, e.bwd_mem_access), (28, 14));
        let z = clsnn_backward_estimate::<u64>(&[0, 0]);
        assert_eq!((z.macs, z.mem_access), (0, 0));
    }

    fn sizes() -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(1usize..40, 2..6)
    }

    proptest! {
        #[test]
        fn forward_matches_term_sum(sz in sizes(), num in proptest::collection::vec(0i64..=20, 5)) {
            let s: Vec<Exact> = num[..sz.len() - 1].iter().map(|&n| ratio(n, 20)).collect();
            let f = forward_cost(&sz, &s, LayerKind::Snn, 1).unwrap();
            let mut ma = Exact::from(0);
            let mut mac = Exact::from(0);
            for i in 1..sz.len() {
                ma += (Exact::from(1) - s[i - 1]) * Exact::from((sz[i] * sz[i - 1]) as i64) + Exact::from(2 * sz[i] as i64);
                mac += Exact::from(sz[i] as i64);
            }
            prop_assert_eq!(&f.mem_access, &ma);
            prop_assert_eq!(&f.acs, &ma);
            prop_assert_eq!(f.macs, mac);
        }

        #[test]
        fn clsnn_macs_double_accesses(sz in sizes()) {
            let b = clsnn_backward_estimate::<u64>(&sz);
            prop_assert_eq!(b.macs, 2 * b.mem_access);
        }

        #[test]
        fn costs_monotone_in_sparsity(sz in sizes(), a in 0.0f64..1.0, d in 0.0f64..0.5) {
            let k = sz.len() - 1;
            let b = (a + d).min(1.0);
            let lo = forward_cost(&sz, &vec![a; k], LayerKind::Snn, 1).unwrap();
            let hi = forward_cost(&sz, &vec![b; k], LayerKind::Snn, 1).unwrap();
            prop_assert!(hi.mem_access <= lo.mem_access + 1e-9);
            let pa = agrel_backward_cost(&sz, &SparsityProfile::uniform(k, a, a, a)).unwrap();
            let pb = agrel_backward_cost(&sz, &SparsityProfile::uniform(k, b, b, b)).unwrap();
            prop_assert!(pb.macs() <= pa.macs() + 1e-9);
            prop_assert!(pb.mem_access() <= pa.mem_access() + 1e-9);
            prop_assert!(banditron_backward_cost(sz[0], b, 2).macs <= banditron_backward_cost(sz[0], a, 2).macs + 1e-9);
        }
    }
}
