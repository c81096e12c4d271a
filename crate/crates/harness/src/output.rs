//! Result files: JSONL trial and training logs, CSV tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spikebmi_core::learning::{EpochStats, LearnerKind};
use spikebmi_core::ops::PerturbationKind;

use crate::closed_loop::{ClosedLoopOutput, PhaseSummary, SeedRun, SweepCell};
use crate::error::{HarnessError, Result};
use crate::open_loop::{runs_csv, OpenLoopMeta, OpenLoopRun};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(&it)?);
        s.push('\n');
    }
    Ok(s)
}

#[derive(Serialize)]
struct TrialLine {
    seed: u64,
    learner: LearnerKind,
    kind: PerturbationKind,
    ratio: f64,
    trial: usize,
    perturbed: bool,
    success: bool,
    time_to_target: Option<f64>,
    effective_time: f64,
}

#[derive(Serialize)]
struct EpochLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(flatten)]
    stats: &'a EpochStats,
}

fn trial_lines(run: &SeedRun, max_duration: f64) -> Vec<TrialLine> {
    run.trials
        .iter()
        .enumerate()
        .map(|(i, t)| TrialLine {
            seed: run.seed,
            learner: run.learner,
            kind: run.perturbation.kind,
            ratio: run.perturbation.ratio,
            trial: i,
            perturbed: i >= run.perturbation.onset_trial && run.perturbation.ratio > 0.0,
            success: t.success,
            time_to_target: t.time_to_target,
            effective_time: t.effective_time(max_duration),
        })
        .collect()
}

fn trajectory_csv(runs: &[SeedRun]) -> String {
    let mut s = String::from("seed,learner,trial,t,x,y,vx,vy,class_x,class_y,reward_x,reward_y\n");
    for r in runs {
        for (i, tr) in r.trials.iter().enumerate() {
            for p in &tr.trajectory {
                let _ = writeln!(
                    s,
                    "{},{},{},{:.2},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                    r.seed,
                    r.learner.label(),
                    i,
                    p.t,
                    p.pos[0],
                    p.pos[1],
                    p.vel[0],
                    p.vel[1],
                    p.predicted[0],
                    p.predicted[1],
                    p.rewards[0] as u8,
                    p.rewards[1] as u8
                );
            }
        }
    }
    s
}

pub fn summary_csv(rows: &[PhaseSummary]) -> String {
    let mut s = String::from(
        "learner,n_seeds,pre,post,late,success_rate,fwd_macs,fwd_acs,fwd_mem_access,bwd_macs,bwd_mem_access\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.learner.label(),
            r.n_seeds,
            r.pre,
            r.post,
            r.late,
            r.success_rate,
            r.fwd_macs_per_step,
            r.fwd_acs_per_step,
            r.fwd_mem_per_step,
            r.bwd_macs_per_step,
            r.bwd_mem_per_step
        );
    }
    s
}

/// Writes per-seed trial logs, their merge, the phase summary and (when
/// recorded) trajectories into `dir`. Returns the written paths.
pub fn write_closed_loop(dir: &Path, out: &ClosedLoopOutput, summary: &[PhaseSummary], max_duration: f64) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut merged = String::new();
    let mut seeds: Vec<u64> = out.runs.iter().map(|r| r.seed).collect();
    seeds.dedup();
    for seed in seeds {
        let runs: Vec<&SeedRun> = out.runs.iter().filter(|r| r.seed == seed).collect();
        let text = jsonl(runs.iter().flat_map(|r| trial_lines(r, max_duration)))?;
        let p = dir.join(format!("trials_seed{seed}.jsonl"));
        write_file(&p, &text)?;
        merged.push_str(&text);
        written.push(p);
    }
    let p = dir.join("trials.jsonl");
    write_file(&p, &merged)?;
    written.push(p);

    let logs = out.stage1_logs.iter().flat_map(|(seed, log)| log.iter().map(move |e| EpochLine { seed: Some(*seed), stats: e }));
    let p = dir.join("stage1_log.jsonl");
    write_file(&p, &jsonl(logs)?)?;
    written.push(p);

    let p = dir.join("summary.csv");
    write_file(&p, &summary_csv(summary))?;
    written.push(p);
    let p = dir.join("summary.json");
    write_file(&p, &serde_json::to_string_pretty(summary)?)?;
    written.push(p);

    if out.runs.iter().any(|r| r.trials.iter().any(|t| !t.trajectory.is_empty())) {
        let p = dir.join("trajectories.csv");
        write_file(&p, &trajectory_csv(&out.runs))?;
        written.push(p);
    }
    Ok(written)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("kind,ratio,learner,mean_time_to_target,n_seeds\n");
    for c in cells {
        let _ = writeln!(s, "{},{},{},{:.4},{}", c.kind.label(), c.ratio, c.learner.label(), c.mean, c.per_seed.len());
    }
    s
}

pub fn write_sweep(dir: &Path, cells: &[SweepCell]) -> Result<Vec<PathBuf>> {
    let a = dir.join("sweep.csv");
    write_file(&a, &sweep_csv(cells))?;
    let b = dir.join("sweep.json");
    write_file(&b, &serde_json::to_string_pretty(cells)?)?;
    Ok(vec![a, b])
}

pub fn training_log(epochs: &[EpochStats]) -> Result<String> {
    jsonl(epochs.iter().map(|e| EpochLine { seed: None, stats: e }))
}

pub fn write_open_loop(dir: &Path, runs: &[OpenLoopRun], meta: &OpenLoopMeta) -> Result<Vec<PathBuf>> {
    let a = dir.join("open_loop.csv");
    write_file(&a, &runs_csv(runs))?;
    let b = dir.join("open_loop.json");
    #[derive(Serialize)]
    struct Doc<'a> {
        meta: &'a OpenLoopMeta,
        runs: &'a [OpenLoopRun],
    }
    write_file(&b, &serde_json::to_string_pretty(&Doc { meta, runs })?)?;
    Ok(vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_lines_are_flat_json() {
        let e = [EpochStats { epoch: 0, loss: 1.5, accuracy: 0.25 }];
        assert_eq!(training_log(&e).unwrap(), "{\"epoch\":0,\"loss\":1.5,\"accuracy\":0.25}\n");
    }
}
