//! Weight-change machinery: offline surrogate-gradient pretraining and the
//! two online rules (Banditron on the output layer, AGREL on all layers).
//!
//! The output layer is read as independent axis blocks of `C` units (x
//! first, then y); each block has its own prediction, exploration draw and
//! reward bit.

mod agrel;
mod banditron;
mod pretrain;

pub use agrel::{agrel_apply, agrel_deltas, winner_mask, AgrelDeltas, AgrelLearner};
pub use banditron::{banditron_apply, banditron_delta, BanditronLearner, Exploration};
pub use pretrain::{
    pretrain, AdamWConfig, EpochStats, LabeledSequence, PretrainConfig, PretrainReport, Surrogate,
};

use serde::{Deserialize, Serialize};

use crate::codec::ClassLabelPair;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::snn::{DeepSnn, ForwardOutput, SpikeBinVector};

/// Number of independently decoded axes.
pub const AXES: usize = 2;

/// Argmax of the membrane potentials; ties go to the lowest index.
pub fn predict_class<T: Real>(out_membrane: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in out_membrane.iter().enumerate().skip(1) {
        if v > out_membrane[best] {
            best = i;
        }
    }
    best
}

/// Per-axis predictions from the full output membrane.
pub fn predict_pair<T: Real>(out_membrane: &[T]) -> ClassLabelPair {
    let c = out_membrane.len() / AXES;
    ClassLabelPair { x: predict_class(&out_membrane[..c]), y: predict_class(&out_membrane[c..2 * c]) }
}

/// Multiclass hinge loss `max_{c != y} [1 - out_y + out_c]_+`, with the
/// straight-through factor `dS/dU = 1`. Diagnostic only.
pub fn hinge_loss<T: Real>(out: &[T], y: usize) -> Result<T> {
    if y >= out.len() {
        return Err(Error::argument(format!("label {y} outside [0, {})", out.len())));
    }
    let mut worst = T::zero();
    for (c, &v) in out.iter().enumerate() {
        if c != y {
            worst = worst.max(T::one() - out[y] + v);
        }
    }
    Ok(worst)
}

/// Reward bit for one axis: 1 iff the emitted class matched the label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardSignal {
    pub correct: bool,
}

/// Backward-pass operation tally of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BackwardTally {
    pub macs: u64,
    pub mem_access: u64,
}

impl std::ops::AddAssign for BackwardTally {
    fn add_assign(&mut self, o: Self) {
        self.macs += o.macs;
        self.mem_access += o.mem_access;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    None,
    Banditron,
    Agrel,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::None, LearnerKind::Banditron, LearnerKind::Agrel];

    pub fn label(&self) -> &'static str {
        match self {
            LearnerKind::None => "DSNN",
            LearnerKind::Banditron => "DSNN_Banditron",
            LearnerKind::Agrel => "DSNN_AGREL",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "fixed" => Ok(LearnerKind::None),
            "banditron" => Ok(LearnerKind::Banditron),
            "agrel" => Ok(LearnerKind::Agrel),
            other => Err(Error::argument(format!("unknown learner '{other}'"))),
        }
    }
}

/// What the decoder emits for one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    /// Argmax per axis.
    pub predicted: ClassLabelPair,
    /// Class actually sent to the effector (differs from `predicted` only
    /// under Banditron exploration).
    pub emitted: ClassLabelPair,
    /// Sampling probability of `emitted` per axis.
    pub prob: [f64; AXES],
}

/// Online calibration rule driving a decoder.
#[derive(Clone, Debug)]
pub enum OnlineRule {
    Fixed,
    Banditron(BanditronLearner),
    Agrel(AgrelLearner),
}

impl OnlineRule {
    pub fn kind(&self) -> LearnerKind {
        match self {
            OnlineRule::Fixed => LearnerKind::None,
            OnlineRule::Banditron(_) => LearnerKind::Banditron,
            OnlineRule::Agrel(_) => LearnerKind::Agrel,
        }
    }

    /// The rule's own step size (Banditron multiplier or AGREL alpha).
    pub fn default_rate(&self) -> f64 {
        match self {
            OnlineRule::Fixed => 0.0,
            OnlineRule::Banditron(b) => b.rate(),
            OnlineRule::Agrel(a) => a.alpha(),
        }
    }

    pub fn decide<T: Real>(&mut self, out_membrane: &[T]) -> Decision {
        let predicted = predict_pair(out_membrane);
        match self {
            OnlineRule::Banditron(b) => {
                let ex = b.explore(predicted.x);
                let ey = b.explore(predicted.y);
                Decision {
                    predicted,
                    emitted: ClassLabelPair::new(ex.sampled, ey.sampled),
                    prob: [ex.prob, ey.prob],
                }
            }
            _ => Decision { predicted, emitted: predicted, prob: [1.0; AXES] },
        }
    }

    /// Applies one online update given per-axis reward bits. `rate` replaces
    /// the rule's own step size.
    pub fn learn<T: Real>(
        &mut self,
        net: &mut DeepSnn<T>,
        input: &SpikeBinVector,
        fwd: &ForwardOutput<T>,
        decision: &Decision,
        rewards: [bool; AXES],
        rate: f64,
    ) -> Result<BackwardTally> {
        let mut tally = BackwardTally::default();
        match self {
            OnlineRule::Fixed => {}
            OnlineRule::Banditron(b) => {
                let s2 = fwd
                    .last_hidden()
                    .ok_or_else(|| Error::config("Banditron needs at least one hidden layer"))?;
                let c = b.n_classes();
                for axis in 0..AXES {
                    let n = banditron_apply(
                        net.output_layer_mut(),
                        axis * c,
                        c,
                        s2,
                        decision.predicted.axis(axis),
                        decision.emitted.axis(axis),
                        decision.prob[axis],
                        rewards[axis],
                        rate,
                    )?;
                    tally.macs += n as u64;
                    tally.mem_access += n as u64;
                }
            }
            OnlineRule::Agrel(_) => {
                let n_out = net.n_outputs();
                let c = n_out / AXES;
                let winners = [decision.emitted.x, c + decision.emitted.y];
                let z = winner_mask(n_out, &winners);
                tally += agrel_apply(net, input, &fwd.hidden_spikes, &z, &rewards, rate)?;
            }
        }
        Ok(tally)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn argmax_and_ties() {
        assert_eq!(predict_class(&[0.1, 0.9, 0.3, 0.2]), 1);
        assert_eq!(predict_class(&[0.5f64; 4]), 0);
        assert_eq!(predict_pair(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]), ClassLabelPair::new(1, 3));
    }

    #[test]
    fn hinge_cases() {
        assert_eq!(hinge_loss(&[3.0, 1.0, 2.0], 0).unwrap(), 0.0);
        assert_eq!(hinge_loss(&[0.0f64; 4], 2).unwrap(), 1.0);
        assert!(hinge_loss(&[0.0f64; 4], 4).is_err());
    }

    #[test]
    fn learner_kind_parsing() {
        assert_eq!("AGREL".parse::<LearnerKind>().unwrap(), LearnerKind::Agrel);
        assert_eq!("none".parse::<LearnerKind>().unwrap(), LearnerKind::None);
        assert!("sgd".parse::<LearnerKind>().is_err());
    }

    proptest! {
        #[test]
        fn argmax_matches_linear_scan(v in proptest::collection::vec(-5.0f64..5.0, 1..16)) {
            let mut best = 0;
            for i in 0..v.len() {
                if v[i] > v[best] { best = i; }
            }
            prop_assert_eq!(predict_class(&v), best);
        }

        #[test]
        fn hinge_matches_brute_force(v in proptest::collection::vec(-3.0f64..3.0, 2..10), y in 0usize..10) {
            let y = y % v.len();
            let mut brute = f64::NEG_INFINITY;
            for c in 0..v.len() {
                if c != y { brute = brute.max((1.0 - v[y] + v[c]).max(0.0)); }
            }
            prop_assert!((hinge_loss(&v, y).unwrap() - brute).abs() < 1e-12);
        }
    }
}
