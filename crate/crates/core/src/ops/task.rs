//! Center-out reaching task with an acceptance window and hold requirement.
//!
//! Time is tracked in whole steps of `dt` so that boundary comparisons are
//! exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{ClassLabelPair, VelocityCodec};
use crate::error::{Error, Result};

/// What the simulated participant intends while inside the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldPolicy {
    /// Intend zero motion inside the window.
    Rest,
    /// Keep pointing at the target center.
    #[default]
    Track,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub target_distance: f64,
    pub accept_radius: f64,
    /// Seconds the cursor must stay inside the window.
    pub hold_required: f64,
    /// Latest admissible window entry, seconds.
    pub max_duration: f64,
    /// Extra time after `max_duration` for a started hold to finish.
    pub grace: f64,
    pub dt: f64,
    /// Intended cursor speed in units/s; also the label range per axis.
    pub speed: f64,
    /// Velocity classes per axis.
    pub n_classes: usize,
    #[serde(default)]
    pub hold_policy: HoldPolicy,
    /// Damping `kappa` in `normalize(direction - kappa * velocity)`; 0 disables.
    #[serde(default)]
    pub damping: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            target_distance: 40.0,
            accept_radius: 4.0,
            hold_required: 0.5,
            max_duration: 3.0,
            grace: 0.5,
            dt: 0.01,
            speed: 60.0,
            n_classes: 4,
            hold_policy: HoldPolicy::Track,
            damping: 0.0,
        }
    }
}

fn steps(seconds: f64, dt: f64) -> u32 {
    (seconds / dt).round() as u32
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.accept_radius > 0.0) || !(self.target_distance > 0.0) || !(self.speed > 0.0) {
            return Err(Error::config("dt, accept radius, target distance and speed must be positive"));
        }
        if !(self.hold_required < self.max_duration) || self.grace < 0.0 {
            return Err(Error::config("hold time must be shorter than the trial limit"));
        }
        if self.n_classes < 2 {
            return Err(Error::config("need at least two velocity classes"));
        }
        if self.damping < 0.0 {
            return Err(Error::config("damping must be non-negative"));
        }
        Ok(())
    }

    pub fn hold_steps(&self) -> u32 {
        steps(self.hold_required, self.dt)
    }

    pub fn max_steps(&self) -> u32 {
        steps(self.max_duration, self.dt)
    }

    pub fn timeout_steps(&self) -> u32 {
        steps(self.max_duration + self.grace, self.dt)
    }

    /// Symmetric `±speed` velocity codec used for labels and reconstruction.
    pub fn codec(&self) -> Result<VelocityCodec<f64>> {
        VelocityCodec::symmetric(self.n_classes, self.speed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ongoing,
    Success,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub rewards: [bool; 2],
    pub status: TrialStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub predicted: [usize; 2],
    pub rewards: [bool; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trajectory: Vec<TrajectoryPoint>,
    /// Entry time of the successful hold.
    pub time_to_target: Option<f64>,
    pub success: bool,
}

impl TrialRecord {
    /// Time used for averaging; failures count as `max_duration`.
    pub fn effective_time(&self, max_duration: f64) -> f64 {
        match (self.success, self.time_to_target) {
            (true, Some(t)) => t,
            _ => max_duration,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CenterOutEnv {
    cfg: EnvConfig,
    codec: VelocityCodec<f64>,
    pos: [f64; 2],
    vel: [f64; 2],
    target: [f64; 2],
    step: u32,
    hold: u32,
    entry_step: Option<u32>,
    status: TrialStatus,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn normalize(a: [f64; 2]) -> [f64; 2] {
    let n = norm(a);
    if n > 0.0 {
        [a[0] / n, a[1] / n]
    } else {
        [0.0, 0.0]
    }
}

impl CenterOutEnv {
    /// A new environment with the target at `(target_distance, 0)`.
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let codec = cfg.codec()?;
        let target = [cfg.target_distance, 0.0];
        Ok(Self { cfg, codec, pos: [0.0; 2], vel: [0.0; 2], target, step: 0, hold: 0, entry_step: None, status: TrialStatus::Ongoing })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn codec(&self) -> &VelocityCodec<f64> {
        &self.codec
    }

    pub fn cursor(&self) -> [f64; 2] {
        self.pos
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.vel
    }

    pub fn target(&self) -> [f64; 2] {
        self.target
    }

    pub fn status(&self) -> TrialStatus {
        self.status
    }

    pub fn elapsed(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn hold_elapsed(&self) -> f64 {
        self.hold as f64 * self.cfg.dt
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    pub fn in_window(&self) -> bool {
        norm(sub(self.target, self.pos)) <= self.cfg.accept_radius
    }

    /// Starts a trial toward an explicit target.
    pub fn reset_with_target(&mut self, target: [f64; 2]) {
        self.pos = [0.0; 2];
        self.vel = [0.0; 2];
        self.target = target;
        self.step = 0;
        self.hold = 0;
        self.entry_step = None;
        self.status = TrialStatus::Ongoing;
    }

    /// Starts a trial toward a uniformly placed target on the circle.
    pub fn new_trial<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let d = self.cfg.target_distance;
        self.reset_with_target([d * a.cos(), d * a.sin()]);
    }

    /// Unit cursor-to-target direction (zero inside the window under
    /// [`HoldPolicy::Rest`]).
    pub fn intended_direction(&self) -> [f64; 2] {
        if self.cfg.hold_policy == HoldPolicy::Rest && self.in_window() {
            return [0.0, 0.0];
        }
        let d = normalize(sub(self.target, self.pos));
        if self.cfg.damping > 0.0 {
            let k = self.cfg.damping / self.cfg.speed;
            normalize([d[0] - k * self.vel[0], d[1] - k * self.vel[1]])
        } else {
            d
        }
    }

    pub fn intended_velocity(&self) -> [f64; 2] {
        let d = self.intended_direction();
        [d[0] * self.cfg.speed, d[1] * self.cfg.speed]
    }

    /// Per-axis class of the intended velocity.
    pub fn label(&self) -> ClassLabelPair {
        self.codec.quantize(self.intended_velocity())
    }

    /// Moves the cursor by `decoded_vel * dt` and updates the trial state.
    /// Rewards compare the class of `decoded_vel` with the label before the
    /// move.
    pub fn step(&mut self, decoded_vel: [f64; 2]) -> Result<StepOutcome> {
        if self.status != TrialStatus::Ongoing {
            return Err(Error::State("trial already finished".into()));
        }
        let label = self.label();
        let decoded = self.codec.quantize(decoded_vel);
        let rewards = [decoded.x == label.x, decoded.y == label.y];

        let dt = self.cfg.dt;
        self.vel = decoded_vel;
        self.pos = [self.pos[0] + decoded_vel[0] * dt, self.pos[1] + decoded_vel[1] * dt];
        self.step += 1;

        if self.in_window() {
            if self.hold == 0 {
                self.entry_step = Some(self.step);
            }
            self.hold += 1;
        } else {
            self.hold = 0;
            self.entry_step = None;
        }

        let entry_ok = self.entry_step.is_some_and(|s| s <= self.cfg.max_steps());
        self.status = if entry_ok && self.hold >= self.cfg.hold_steps() {
            TrialStatus::Success
        } else if self.step >= self.cfg.timeout_steps() || (self.step >= self.cfg.max_steps() && !entry_ok) {
            // no admissible hold can complete any more
            TrialStatus::Timeout
        } else {
            TrialStatus::Ongoing
        };
        Ok(StepOutcome { rewards, status: self.status })
    }

    /// Entry time of the current hold, seconds.
    pub fn time_to_target(&self) -> Option<f64> {
        match self.status {
            TrialStatus::Success => self.entry_step.map(|s| s as f64 * self.cfg.dt),
            _ => None,
        }
    }
}

/// Free-function form of [`CenterOutEnv::intended_direction`].
pub fn intended_direction(env: &CenterOutEnv) -> [f64; 2] {
    env.intended_direction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> CenterOutEnv {
        CenterOutEnv::new(EnvConfig::default()).unwrap()
    }

    fn run(env: &mut CenterOutEnv, mut policy: impl FnMut(&CenterOutEnv) -> [f64; 2]) -> TrialStatus {
        loop {
            let v = policy(env);
            let o = env.step(v).unwrap();
            if o.status != TrialStatus::Ongoing {
                return o.status;
            }
        }
    }

    #[test]
    fn direction_points_at_target() {
        let e = env();
        assert_eq!(e.intended_direction(), [1.0, 0.0]);
        let mut rest = CenterOutEnv::new(EnvConfig { hold_policy: HoldPolicy::Rest, ..EnvConfig::default() }).unwrap();
        rest.reset_with_target([2.0, 1.0]);
        assert_eq!(rest.intended_direction(), [0.0, 0.0]);
    }

    #[test]
    fn direction_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = env();
        for _ in 0..200 {
            let t = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            e.reset_with_target(t);
            let d = e.intended_direction();
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (th.cos(), th.sin());
            e.reset_with_target([c * t[0] - s * t[1], s * t[0] + c * t[1]]);
            let r = e.intended_direction();
            assert!((r[0] - (c * d[0] - s * d[1])).abs() < 1e-12);
            assert!((r[1] - (s * d[0] + c * d[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_reach_matches_kinematics() {
        let mut e = env();
        let status = run(&mut e, |e| {
            let d = e.intended_direction();
            [60.0 * d[0], 60.0 * d[1]]
        });
        assert_eq!(status, TrialStatus::Success);
        // (40 - 4) / 60 = 0.6 s to the window edge
        assert!((e.time_to_target().unwrap() - 0.6).abs() < 0.011);
        assert!((e.elapsed() - 1.1).abs() < 0.011);
    }

    #[test]
    fn idle_cursor_times_out() {
        let mut e = env();
        assert_eq!(run(&mut e, |_| [0.0, 0.0]), TrialStatus::Timeout);
        assert_eq!(e.time_to_target(), None);
        assert!(matches!(e.step([0.0, 0.0]), Err(Error::State(_))));
    }

    #[test]
    fn leaving_the_window_resets_the_hold() {
        let mut e = env();
        e.reset_with_target([4.0, 0.0]);
        // inside from the first step; 40 steps (0.4 s) inside then leave
        for _ in 0..40 {
            e.step([0.0, 0.0]).unwrap();
        }
        assert!((e.hold_elapsed() - 0.4).abs() < 1e-12);
        let o = e.step([-500.0, 0.0]).unwrap();
        assert_eq!(o.status, TrialStatus::Ongoing);
        assert_eq!(e.hold_elapsed(), 0.0);
    }

    #[test]
    fn late_hold_completes_within_grace() {
        let mut e = env();
        e.reset_with_target([0.0, 100.0]);
        // enter at step 290 (2.9 s), then hold
        let status = run(&mut e, |e| if e.steps_taken() == 289 { [0.0, 9600.0] } else { [0.0, 0.0] });
        assert_eq!(status, TrialStatus::Success);
        assert!((e.time_to_target().unwrap() - 2.9).abs() < 1e-9);
        assert!(e.elapsed() > 3.0);
    }

    #[test]
    fn rewards_compare_classes() {
        let mut e = env();
        // label: intended (60, 0) -> classes (3, 2)
        let o = e.step([45.0, 15.0]).unwrap();
        assert_eq!(o.rewards, [true, true]);
        e.reset_with_target([40.0, 0.0]);
        let o = e.step([-45.0, 15.0]).unwrap();
        assert_eq!(o.rewards, [false, true]);
        e.reset_with_target([0.0, -40.0]);
        // label (2, 0)
        let o = e.step([15.0, -15.0]).unwrap();
        assert_eq!(o.rewards, [true, false]);
    }

    #[test]
    fn targets_on_circle_and_uniform() {
        let mut e = env();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut bins = [0usize; 16];
        for _ in 0..n {
            e.new_trial(&mut rng);
            let t = e.target();
            assert!((t[0].hypot(t[1]) - 40.0).abs() < 1e-9);
            assert_eq!(e.cursor(), [0.0, 0.0]);
            let a = t[1].atan2(t[0]).rem_euclid(std::f64::consts::TAU);
            bins[((a / std::f64::consts::TAU * 16.0) as usize).min(15)] += 1;
        }
        let expect = n as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expect).powi(2) / expect).sum();
        // chi-square, 15 dof, p = 0.01 critical value
        assert!(chi2 < 30.578, "chi2 = {chi2}");
    }
}
