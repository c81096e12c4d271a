//! Closed-loop trial loop: intention, spikes, decoding, cursor update and
//! online learning, one bin at a time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::ClassLabelPair;
use crate::error::Result;
use crate::learning::{LabeledSequence, OnlineRule};
use crate::metrics::ResourceLedger;
use crate::ops::{CenterOutEnv, OpsBrain, TrajectoryPoint, TrialRecord, TrialStatus};
use crate::snn::DeepSnn;

/// One simulated participant plus decoder.
#[derive(Clone, Debug)]
pub struct ClosedLoopSystem {
    pub brain: OpsBrain,
    pub env: CenterOutEnv,
    pub net: DeepSnn<f64>,
    pub rule: OnlineRule,
    pub ledger: ResourceLedger,
}

impl ClosedLoopSystem {
    pub fn new(brain: OpsBrain, env: CenterOutEnv, net: DeepSnn<f64>, rule: OnlineRule) -> Self {
        let ledger = ResourceLedger::for_network(&net.layer_sizes());
        Self { brain, env, net, rule, ledger }
    }

    /// Runs one trial toward a fresh target. `rate` scales online updates
    /// (0 disables learning).
    pub fn run_trial<R: Rng + ?Sized>(&mut self, targets: &mut R, rate: f64, keep_trajectory: bool) -> Result<TrialRecord> {
        self.env.new_trial(targets);
        self.net.reset_states();
        let mut trajectory = Vec::new();
        loop {
            let x = self.env.intended_direction();
            let spikes = self.brain.generate(x);
            let fwd = self.net.forward_observed(&spikes, &mut self.ledger)?;
            let decision = self.rule.decide(&fwd.out_membrane);
            let vel = self.env.codec().reconstruct(decision.emitted)?;
            let outcome = self.env.step(vel)?;
            if rate != 0.0 {
                let tally = self.rule.learn(&mut self.net, &spikes, &fwd, &decision, outcome.rewards, rate)?;
                self.ledger.record_backward(tally);
            }
            if keep_trajectory {
                trajectory.push(TrajectoryPoint {
                    t: self.env.elapsed(),
                    pos: self.env.cursor(),
                    vel,
                    predicted: decision.emitted.as_array(),
                    rewards: outcome.rewards,
                });
            }
            if outcome.status != TrialStatus::Ongoing {
                break;
            }
        }
        let time_to_target = self.env.time_to_target();
        Ok(TrialRecord { trajectory, time_to_target, success: self.env.status() == TrialStatus::Success })
    }
}

/// Records spikes and intended-velocity labels while an ideal decoder
/// drives the cursor. With probability `jitter` per bin and axis the cursor
/// instead receives a random class, which widens the visited states.
pub fn collect_demonstrations<R: Rng + ?Sized>(
    brain: &mut OpsBrain,
    env: &mut CenterOutEnv,
    n_trials: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<Vec<LabeledSequence>> {
    let c = env.config().n_classes;
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        env.new_trial(rng);
        let mut seq = LabeledSequence::default();
        loop {
            let x = env.intended_direction();
            let label = env.label();
            seq.push(brain.generate(x), label);
            let mut drive = label;
            if jitter > 0.0 {
                if rng.random::<f64>() < jitter {
                    drive.x = rng.random_range(0..c);
                }
                if rng.random::<f64>() < jitter {
                    drive.y = rng.random_range(0..c);
                }
            }
            let vel = env.codec().reconstruct(ClassLabelPair::new(drive.x, drive.y))?;
            if env.step(vel)?.status != TrialStatus::Ongoing {
                break;
            }
        }
        out.push(seq);
    }
    Ok(out)
}

/// Geometric learning-rate decay across the second training stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub start: f64,
    pub end: f64,
    pub trials: usize,
}

impl Default for RateSchedule {
    fn default() -> Self {
        Self { start: 5e-8, end: 5e-10, trials: 100 }
    }
}

impl RateSchedule {
    /// Rate for trial `i` (0-based); `start` at 0, `end` at `trials - 1`.
    pub fn rate(&self, i: usize) -> f64 {
        if self.trials <= 1 {
            return self.start;
        }
        let f = i.min(self.trials - 1) as f64 / (self.trials - 1) as f64;
        self.start * (self.end / self.start).powf(f)
    }
}

/// Second training stage: closed-loop trials with the online rule at the
/// scheduled rate.
pub fn closed_loop_stage2<R: Rng + ?Sized>(
    sys: &mut ClosedLoopSystem,
    schedule: &RateSchedule,
    targets: &mut R,
) -> Result<Vec<TrialRecord>> {
    (0..schedule.trials).map(|i| sys.run_trial(targets, schedule.rate(i), false)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{pretrain, BanditronLearner, PretrainConfig};
    use crate::ops::{EnvConfig, OpsParams};
    use crate::snn::NetworkConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system(rule: OnlineRule, seed: u64) -> ClosedLoopSystem {
        let brain = OpsBrain::new(&OpsParams::default(), seed).unwrap();
        let env = CenterOutEnv::new(EnvConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DeepSnn::init(&NetworkConfig::closed_loop(), &mut rng).unwrap();
        ClosedLoopSystem::new(brain, env, net, rule)
    }

    #[test]
    fn schedule_endpoints() {
        let s = RateSchedule::default();
        assert!((s.rate(0) - 5e-8).abs() < 1e-20);
        assert!((s.rate(99) - 5e-10).abs() < 1e-22);
        assert!((s.rate(50) / s.rate(49) - s.rate(1) / s.rate(0)).abs() < 1e-9);
    }

    #[test]
    fn zero_trials_leave_the_net_unchanged() {
        let mut sys = system(OnlineRule::Banditron(BanditronLearner::new(0.1, 4, 1).unwrap()), 3);
        let before = sys.net.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = closed_loop_stage2(&mut sys, &RateSchedule { trials: 0, ..RateSchedule::default() }, &mut rng).unwrap();
        assert!(out.is_empty());
        assert_eq!(sys.net, before);
    }

    #[test]
    fn fixed_rule_has_no_backward_cost() {
        let mut sys = system(OnlineRule::Fixed, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..3 {
            sys.run_trial(&mut rng, 1.0, false).unwrap();
        }
        assert!(sys.ledger.forward.steps() > 0);
        assert_eq!((sys.ledger.bwd_macs, sys.ledger.bwd_mem_access), (0, 0));
    }

    #[test]
    fn trials_are_reproducible() {
        let run = || {
            let mut sys = system(OnlineRule::Banditron(BanditronLearner::new(0.1, 4, 9).unwrap()), 5);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            (0..3).map(|_| sys.run_trial(&mut rng, 0.01, true).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn success_records_are_consistent() {
        let mut sys = system(OnlineRule::Fixed, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut demo_brain = sys.brain.clone();
        let mut demo_env = sys.env.clone();
        let data = collect_demonstrations(&mut demo_brain, &mut demo_env, 40, 0.2, &mut rng).unwrap();
        let cfg = PretrainConfig { epochs: 3, batch_size: 64, ..PretrainConfig::closed_loop_stage1() };
        pretrain(&mut sys.net, &data, &cfg).unwrap();
        for _ in 0..10 {
            let r = sys.run_trial(&mut rng, 0.0, true).unwrap();
            if r.success {
                let t = r.time_to_target.unwrap();
                assert!(t <= 3.0);
                // the last 0.5 s of the trajectory lies inside the window
                let tail = &r.trajectory[r.trajectory.len() - 50..];
                let target = sys.env.target();
                for p in tail {
                    assert!((p.pos[0] - target[0]).hypot(p.pos[1] - target[1]) <= 4.0);
                }
            } else {
                assert!(r.time_to_target.is_none());
            }
        }
    }
}
