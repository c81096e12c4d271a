//! Closed-loop experiments: per-seed two-stage training, perturbed
//! evaluation and perturbation-ratio sweeps.
//!
//! Every seed owns one simulated participant. The same brain instance is
//! used for the demonstrations, the second training stage and evaluation,
//! so its spike stream simply continues. Evaluation targets come from a
//! dedicated stream, so all learners of a seed see the same target order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spikebmi_core::learning::{pretrain, EpochStats, LearnerKind, PretrainConfig};
use spikebmi_core::metrics::{aggregate_time_to_target, ResourceLedger};
use spikebmi_core::ops::{apply_perturbation, CenterOutEnv, OpsBrain, PerturbationKind, PerturbationSpec, TrialRecord};
use spikebmi_core::sim::{closed_loop_stage2, collect_demonstrations, ClosedLoopSystem};
use spikebmi_core::snn::DeepSnn;

use crate::config::ExperimentConfig;
use crate::error::Result;

const STREAM_STAGE1: u64 = 3;
const STREAM_STAGE2: u64 = 4;
const STREAM_EVAL: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Perturbation actually applied for `seed`: same kind, ratio and onset,
/// neuron selection decorrelated across seeds.
pub fn spec_for_seed(spec: &PerturbationSpec, seed: u64) -> PerturbationSpec {
    PerturbationSpec { seed: spec.seed ^ seed.rotate_left(32), ..spec.clone() }
}

/// A seed's participant after the first training stage.
#[derive(Clone, Debug)]
pub struct Stage1 {
    pub seed: u64,
    pub brain: OpsBrain,
    pub net: DeepSnn<f64>,
    /// Empty when the network came from a checkpoint.
    pub log: Vec<EpochStats>,
}

/// Builds the participant for `seed` and trains (or loads) its decoder.
pub fn stage1(cfg: &ExperimentConfig, seed: u64, checkpoint: Option<&DeepSnn<f64>>) -> Result<Stage1> {
    let mut brain = OpsBrain::new(&cfg.ops, seed)?;
    if let Some(net) = checkpoint {
        if net.layer_sizes() != cfg.network.layer_sizes {
            return Err(crate::HarnessError::config(format!(
                "checkpoint layers {:?} differ from config {:?}",
                net.layer_sizes(),
                cfg.network.layer_sizes
            )));
        }
        return Ok(Stage1 { seed, brain, net: net.clone(), log: Vec::new() });
    }
    let mut rng = stream(seed, STREAM_STAGE1);
    let mut net = DeepSnn::<f64>::init(&cfg.network, &mut rng)?;
    let mut env = CenterOutEnv::new(cfg.env.clone())?;
    let demos = collect_demonstrations(&mut brain, &mut env, cfg.stage1.demonstration_trials, cfg.stage1.jitter, &mut rng)?;
    let pcfg = PretrainConfig { seed, ..cfg.stage1.pretrain.clone() };
    let report = pretrain(&mut net, &demos, &pcfg)?;
    net.round_to_storage();
    Ok(Stage1 { seed, brain, net, log: report.epochs })
}

/// Second stage: closed-loop trials under the decaying rate schedule.
pub fn stage2(cfg: &ExperimentConfig, s1: &Stage1, learner: LearnerKind) -> Result<ClosedLoopSystem> {
    let rule = cfg.learner.rule(learner, cfg.env.n_classes, s1.seed)?;
    let env = CenterOutEnv::new(cfg.env.clone())?;
    let mut sys = ClosedLoopSystem::new(s1.brain.clone(), env, s1.net.clone(), rule);
    closed_loop_stage2(&mut sys, &cfg.learner.stage2, &mut stream(s1.seed, STREAM_STAGE2))?;
    sys.ledger = ResourceLedger::for_network(&sys.net.layer_sizes());
    Ok(sys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub learner: LearnerKind,
    pub perturbation: PerturbationSpec,
    /// Neurons touched at onset.
    pub affected: Vec<usize>,
    pub trials: Vec<TrialRecord>,
    /// Evaluation trials only.
    pub ledger: ResourceLedger,
}

/// Runs `cfg.trials` evaluation trials; the perturbation is applied right
/// before trial `onset_trial`, which is the first trial of the perturbed
/// brain.
pub fn evaluate(cfg: &ExperimentConfig, mut sys: ClosedLoopSystem, seed: u64, spec: &PerturbationSpec) -> Result<SeedRun> {
    let spec = spec_for_seed(spec, seed);
    let learner = sys.rule.kind();
    let rate = cfg.learner.online_rate(learner);
    let mut targets = stream(seed, STREAM_EVAL);
    let mut affected = Vec::new();
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        if t == spec.onset_trial {
            affected = apply_perturbation(&mut sys.brain, &spec)?;
        }
        trials.push(sys.run_trial(&mut targets, rate, cfg.trajectories)?);
    }
    Ok(SeedRun { seed, learner, perturbation: spec, affected, trials, ledger: sys.ledger })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopOutput {
    pub runs: Vec<SeedRun>,
    /// Stage-1 training log per seed, in seed order.
    pub stage1_logs: Vec<(u64, Vec<EpochStats>)>,
}

/// Full pipeline for `cfg.learner.kind` and `cfg.perturbation`, seeds in
/// parallel, results in seed order.
pub fn run_closed_loop(cfg: &ExperimentConfig, checkpoint: Option<&DeepSnn<f64>>) -> Result<ClosedLoopOutput> {
    run_closed_loop_for(cfg, checkpoint, &[cfg.learner.kind])
}

/// As [`run_closed_loop`] for several learners sharing each seed's first
/// stage. Runs are ordered by seed, then learner.
pub fn run_closed_loop_for(
    cfg: &ExperimentConfig,
    checkpoint: Option<&DeepSnn<f64>>,
    learners: &[LearnerKind],
) -> Result<ClosedLoopOutput> {
    cfg.validate()?;
    let per_seed: Vec<(Vec<SeedRun>, (u64, Vec<EpochStats>))> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s1 = stage1(cfg, seed, checkpoint)?;
            let runs = learners
                .iter()
                .map(|&l| evaluate(cfg, stage2(cfg, &s1, l)?, seed, &cfg.perturbation))
                .collect::<Result<Vec<_>>>()?;
            Ok((runs, (seed, s1.log)))
        })
        .collect::<Result<_>>()?;
    let mut out = ClosedLoopOutput { runs: Vec::new(), stage1_logs: Vec::new() };
    for (runs, log) in per_seed {
        out.runs.extend(runs);
        out.stage1_logs.push(log);
    }
    Ok(out)
}

/// Mean effective time-to-target over `window` across the given runs.
pub fn window_mean(runs: &[&SeedRun], window: std::ops::Range<usize>, max_duration: f64) -> Result<f64> {
    let trials: Vec<Vec<TrialRecord>> = runs.iter().map(|r| r.trials.clone()).collect();
    Ok(aggregate_time_to_target(&trials, window, max_duration)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub learner: LearnerKind,
    pub n_seeds: usize,
    /// Trials before onset.
    pub pre: f64,
    /// Onset to end.
    pub post: f64,
    /// Last 25 trials (or fewer) after onset.
    pub late: f64,
    pub success_rate: f64,
    pub fwd_macs_per_step: f64,
    pub fwd_acs_per_step: f64,
    pub fwd_mem_per_step: f64,
    pub bwd_macs_per_step: f64,
    pub bwd_mem_per_step: f64,
}

/// Per-learner phase means over all seeds.
pub fn summarize(cfg: &ExperimentConfig, out: &ClosedLoopOutput) -> Result<Vec<PhaseSummary>> {
    let n = cfg.trials;
    let onset = cfg.perturbation.onset_trial.min(n);
    let late_start = n.saturating_sub(25).max(onset);
    let md = cfg.env.max_duration;
    let mut learners: Vec<LearnerKind> = Vec::new();
    for r in &out.runs {
        if !learners.contains(&r.learner) {
            learners.push(r.learner);
        }
    }
    learners
        .into_iter()
        .map(|l| {
            let runs: Vec<&SeedRun> = out.runs.iter().filter(|r| r.learner == l).collect();
            let mean_or_nan = |w: std::ops::Range<usize>| if w.is_empty() { Ok(f64::NAN) } else { window_mean(&runs, w, md) };
            let mut ledger = ResourceLedger::default();
            runs.iter().for_each(|r| ledger.merge(&r.ledger));
            let (ok, total) = runs.iter().flat_map(|r| &r.trials).fold((0, 0), |(a, b), t| (a + t.success as usize, b + 1));
            Ok(PhaseSummary {
                learner: l,
                n_seeds: runs.len(),
                pre: mean_or_nan(0..onset)?,
                post: mean_or_nan(onset..n)?,
                late: mean_or_nan(late_start..n)?,
                success_rate: ok as f64 / total.max(1) as f64,
                fwd_macs_per_step: ledger.fwd_macs_per_step(),
                fwd_acs_per_step: ledger.fwd_acs_per_step(),
                fwd_mem_per_step: ledger.fwd_mem_per_step(),
                bwd_macs_per_step: ledger.bwd_macs_per_step(),
                bwd_mem_per_step: ledger.bwd_mem_per_step(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub kind: PerturbationKind,
    pub ratio: f64,
    pub learner: LearnerKind,
    /// Window mean over all seeds.
    pub mean: f64,
    pub per_seed: Vec<f64>,
}

/// Kinds x ratios x learners grid of window means. Each seed's first
/// stage, and each (seed, learner) second stage, is shared by its cells.
pub fn run_sweep(cfg: &ExperimentConfig, checkpoint: Option<&DeepSnn<f64>>) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let sw = &cfg.sweep;
    let window = sw.window[0]..sw.window[1].min(cfg.trials);
    let md = cfg.env.max_duration;
    // [seed][learner][kind][ratio] -> window mean
    let grid: Vec<Vec<Vec<Vec<f64>>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s1 = stage1(cfg, seed, checkpoint)?;
            sw.learners
                .iter()
                .map(|&l| {
                    let adapted = stage2(cfg, &s1, l)?;
                    sw.kinds
                        .iter()
                        .map(|&kind| {
                            sw.ratios
                                .iter()
                                .map(|&ratio| {
                                    let spec = PerturbationSpec { kind, ratio, ..cfg.perturbation.clone() };
                                    let run = evaluate(cfg, adapted.clone(), seed, &spec)?;
                                    window_mean(&[&run], window.clone(), md)
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(sw.kinds.len() * sw.ratios.len() * sw.learners.len());
    for (ki, &kind) in sw.kinds.iter().enumerate() {
        for (ri, &ratio) in sw.ratios.iter().enumerate() {
            for (li, &learner) in sw.learners.iter().enumerate() {
                let per_seed: Vec<f64> = grid.iter().map(|g| g[li][ki][ri]).collect();
                let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
                cells.push(SweepCell { kind, ratio, learner, mean, per_seed });
            }
        }
    }
    Ok(cells)
}

/// Looks up a sweep cell.
pub fn cell(cells: &[SweepCell], kind: PerturbationKind, ratio: f64, learner: LearnerKind) -> Option<&SweepCell> {
    cells.iter().find(|c| c.kind == kind && c.ratio == ratio && c.learner == learner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spikebmi_core::snn::NetworkConfig;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds = vec![1, 2];
        cfg.trials = 6;
        cfg.perturbation.onset_trial = 3;
        cfg.stage1.demonstration_trials = 10;
        cfg.stage1.pretrain.epochs = 1;
        cfg.learner.stage2.trials = 2;
        cfg.network = NetworkConfig { layer_sizes: vec![46, 16, 8], ..NetworkConfig::closed_loop() };
        cfg
    }

    #[test]
    fn onset_is_the_first_perturbed_trial() {
        let mut cfg = quick();
        cfg.perturbation.ratio = 0.5;
        cfg.seeds = vec![4];
        let s1 = stage1(&cfg, 4, None).unwrap();
        let run = evaluate(&cfg, stage2(&cfg, &s1, LearnerKind::None).unwrap(), 4, &cfg.perturbation).unwrap();
        assert_eq!(run.affected.len(), 23);
        // replay with onset one trial later: trials before the old onset agree
        let mut late = cfg.clone();
        late.perturbation.onset_trial = 4;
        let run2 = evaluate(&late, stage2(&cfg, &s1, LearnerKind::None).unwrap(), 4, &late.perturbation).unwrap();
        assert_eq!(run.trials[..3], run2.trials[..3]);
    }

    #[test]
    fn fixed_runs_have_zero_backward_cost_and_count_every_forward() {
        let mut cfg = quick();
        cfg.trajectories = true;
        let out = run_closed_loop_for(&cfg, None, &[LearnerKind::None, LearnerKind::Agrel]).unwrap();
        assert_eq!(out.runs.len(), 4);
        for r in &out.runs {
            let steps: usize = r.trials.iter().map(|t| t.trajectory.len()).sum();
            assert_eq!(r.ledger.forward.steps(), steps as u64);
            if r.learner == LearnerKind::None {
                assert_eq!((r.ledger.bwd_macs, r.ledger.bwd_mem_access), (0, 0));
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = quick();
        let a = run_closed_loop(&cfg, None).unwrap();
        let b = run_closed_loop(&cfg, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn sweep_shape() {
        let mut cfg = quick();
        cfg.sweep.ratios = vec![0.0, 0.6];
        cfg.sweep.window = [3, 6];
        cfg.seeds = vec![0];
        let cells = run_sweep(&cfg, None).unwrap();
        assert_eq!(cells.len(), 3 * 2 * 3);
        assert!(cells.iter().all(|c| c.per_seed.len() == 1 && (0.0..=3.0).contains(&c.mean)));
        assert!(cell(&cells, PerturbationKind::RateDrift, 0.6, LearnerKind::Agrel).is_some());
    }

    #[test]
    fn checkpoint_with_wrong_shape_rejected() {
        let cfg = quick();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let other = DeepSnn::<f64>::init(&NetworkConfig::closed_loop(), &mut rng).unwrap();
        assert_eq!(stage1(&cfg, 0, Some(&other)).unwrap_err().exit_code(), 2);
    }
}
