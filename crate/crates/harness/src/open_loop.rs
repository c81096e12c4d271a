//! Open-loop streaming evaluation on recorded (or synthetic) sessions.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spikebmi_core::codec::VelocityCodec;
use spikebmi_core::learning::{pretrain, LabeledSequence, LearnerKind, OnlineRule, PretrainReport};
use spikebmi_core::metrics::{r_squared_2d, ResourceLedger};
use spikebmi_core::snn::DeepSnn;
use spikebmi_core::Error as CoreError;

use crate::config::OpenLoopConfig;
use crate::dataset::{Session, SpikeDataset};
use crate::error::{HarnessError, Result};

/// Sidecar stored next to an open-loop checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopMeta {
    /// Bins of the first session used for training.
    pub train_bins: usize,
    pub codec: VelocityCodec<f64>,
    /// Fixed-decoder R² streaming the whole first session.
    pub train_session_r2: f64,
    /// R² over the held-out tail of that same stream.
    pub holdout_r2: Option<f64>,
    pub final_loss: f64,
    pub final_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub session: usize,
    pub n_bins: usize,
    /// `None` when R² is undefined (e.g. a single-bin session); such
    /// sessions are reported but skipped in summaries.
    pub r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopRun {
    pub learner: LearnerKind,
    pub sessions: Vec<SessionScore>,
    pub ledger: ResourceLedger,
}

impl OpenLoopRun {
    pub fn r2(&self) -> Vec<Option<f64>> {
        self.sessions.iter().map(|s| s.r2).collect()
    }
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn save_checkpoint(net: &DeepSnn<f64>, meta: &OpenLoopMeta, path: &Path) -> Result<()> {
    net.save(path)?;
    let mp = meta_path(path);
    std::fs::write(&mp, serde_json::to_string_pretty(meta)?).map_err(|e| HarnessError::io(&mp, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(DeepSnn<f64>, OpenLoopMeta)> {
    let net = DeepSnn::<f64>::load(path).map_err(|e| match e {
        CoreError::Io(io) => HarnessError::data(format!("cannot read checkpoint {}: {io}", path.display())),
        other => other.into(),
    })?;
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| HarnessError::data(format!("cannot read {}: {e}", mp.display())))?;
    let meta = serde_json::from_str(&text).map_err(|e| HarnessError::data(format!("{}: {e}", mp.display())))?;
    Ok((net, meta))
}

fn check_compat(net: &DeepSnn<f64>, ds: &SpikeDataset, bin_window: Option<f64>) -> Result<()> {
    if net.n_inputs() != ds.n_channels {
        return Err(HarnessError::config(format!(
            "decoder expects {} channels, dataset has {}",
            net.n_inputs(),
            ds.n_channels
        )));
    }
    if let Some(w) = bin_window {
        if (w - ds.bin_width_s()).abs() > 1e-9 {
            return Err(HarnessError::config(format!(
                "dataset bins are {} s, network window is {w} s",
                ds.bin_width_s()
            )));
        }
    }
    Ok(())
}

/// Streams one session from a reset state and returns the decoded velocity
/// per bin. With a positive `rate` the rule learns from the quantized
/// recorded velocity after every bin.
pub fn stream_session(
    net: &mut DeepSnn<f64>,
    rule: &mut OnlineRule,
    rate: f64,
    codec: &VelocityCodec<f64>,
    session: Session<'_>,
    ledger: &mut ResourceLedger,
) -> Result<Vec<[f64; 2]>> {
    net.reset_states();
    let mut out = Vec::with_capacity(session.len());
    for (x, v) in session.bins.iter().zip(session.velocities) {
        let fwd = net.forward_observed(x, ledger)?;
        let d = rule.decide(&fwd.out_membrane);
        out.push(codec.reconstruct(d.predicted)?);
        if rate > 0.0 {
            let y = codec.quantize(*v);
            let rewards = [d.emitted.x == y.x, d.emitted.y == y.y];
            ledger.record_backward(rule.learn(net, x, &fwd, &d, rewards, rate)?);
        }
    }
    Ok(out)
}

/// R², or `None` where it is undefined.
fn score(pred: &[[f64; 2]], actual: &[[f64; 2]]) -> Result<Option<f64>> {
    match r_squared_2d(pred, actual) {
        Ok(r) => Ok(Some(r)),
        Err(CoreError::Undefined(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Supervised pretraining on the leading `train_fraction` of the first
/// session. Weights are rounded to checkpoint precision before the
/// validation figures are taken, so a reloaded checkpoint reproduces them.
pub fn pretrain_open_loop(
    ds: &SpikeDataset,
    cfg: &OpenLoopConfig,
    seed: u64,
) -> Result<(DeepSnn<f64>, OpenLoopMeta, PretrainReport)> {
    ds.validate()?;
    if ds.n_sessions() == 0 {
        return Err(HarnessError::data("dataset has no sessions"));
    }
    let first = ds.session(0);
    let n_train = ((first.len() as f64 * cfg.train_fraction).floor() as usize).clamp(1, first.len());
    let codec = VelocityCodec::fit(&first.velocities[..n_train], cfg.n_classes)?;
    let data: Vec<LabeledSequence> = (0..n_train)
        .step_by(cfg.sequence_bins)
        .map(|a| {
            let b = (a + cfg.sequence_bins).min(n_train);
            LabeledSequence {
                inputs: first.bins[a..b].to_vec(),
                labels: first.velocities[a..b].iter().map(|&v| codec.quantize(v)).collect(),
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut net = DeepSnn::<f64>::init(&cfg.network, &mut rng)?;
    check_compat(&net, ds, Some(cfg.network.bin_window))?;
    let pcfg = spikebmi_core::learning::PretrainConfig { seed, ..cfg.pretrain.clone() };
    let report = pretrain(&mut net, &data, &pcfg)?;
    net.round_to_storage();

    let mut probe = net.clone();
    let pred = stream_session(&mut probe, &mut OnlineRule::Fixed, 0.0, &codec, first, &mut ResourceLedger::default())?;
    let train_session_r2 = score(&pred, first.velocities)?
        .ok_or_else(|| HarnessError::data("first session velocity is constant; R² undefined"))?;
    let holdout_r2 = score(&pred[n_train..], &first.velocities[n_train..])?;
    let meta = OpenLoopMeta {
        train_bins: n_train,
        codec,
        train_session_r2,
        holdout_r2,
        final_loss: report.final_loss(),
        final_accuracy: report.final_accuracy(),
    };
    Ok((net, meta, report))
}

/// Streams every session in order with one continuously adapting decoder.
pub fn run_open_loop(
    net: &DeepSnn<f64>,
    codec: &VelocityCodec<f64>,
    ds: &SpikeDataset,
    mut rule: OnlineRule,
    rate: f64,
) -> Result<OpenLoopRun> {
    check_compat(net, ds, None)?;
    let mut net = net.clone();
    let mut ledger = ResourceLedger::for_network(&net.layer_sizes());
    let mut sessions = Vec::with_capacity(ds.n_sessions());
    for (i, s) in ds.sessions().enumerate() {
        let pred = stream_session(&mut net, &mut rule, rate, codec, s, &mut ledger)?;
        sessions.push(SessionScore { session: i, n_bins: s.len(), r2: score(&pred, s.velocities)? });
    }
    Ok(OpenLoopRun { learner: rule.kind(), sessions, ledger })
}

/// CSV with one row per learner and session; undefined R² is left empty.
pub fn runs_csv(runs: &[OpenLoopRun]) -> String {
    let mut s = String::from("learner,session,n_bins,r2\n");
    for run in runs {
        for sc in &run.sessions {
            let r2 = sc.r2.map(|r| format!("{r:.6}")).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", run.learner.label(), sc.session, sc.n_bins, r2));
        }
    }
    s
}
