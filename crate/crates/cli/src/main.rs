//! `spikebmi`: runs the decoder experiments from a TOML config plus
//! command-line overrides. Exit codes: 0 ok, 2 config error, 3 data error,
//! 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikebmi_core::learning::LearnerKind;
use spikebmi_core::ops::PerturbationKind;
use spikebmi_core::snn::DeepSnn;
use spikebmi_harness::closed_loop::{run_closed_loop_for, run_sweep, stage1, summarize};
use spikebmi_harness::open_loop::{load_checkpoint, pretrain_open_loop, run_open_loop, save_checkpoint};
use spikebmi_harness::output::{self, write_file};
use spikebmi_harness::report::{cost_csv, cost_table};
use spikebmi_harness::{ingest_dataset, synth_dataset_with, ExperimentConfig, HarnessError, Mode, Result, SpikeDataset};

#[derive(Parser, Debug)]
#[command(name = "spikebmi", version, about = "Spiking decoder experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    /// Defaults to the `mode` given in the config.
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the seed list; repeat for several seeds.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Learner(s): none, banditron, agrel or all.
    #[arg(long = "learner", global = true)]
    learners: Vec<String>,
    #[arg(long, global = true)]
    perturb_kind: Option<String>,
    #[arg(long, global = true)]
    perturb_ratio: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// SPKD dataset for open-loop runs.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Weight container to load (or, for `pretrain`, to write).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Supervised pretraining; writes a checkpoint and a training log.
    Pretrain {
        /// Train the closed-loop decoder (first stage) instead of the open-loop one.
        #[arg(long)]
        closed_loop: bool,
    },
    /// Streams every dataset session through fixed and adaptive decoders.
    OpenLoop,
    /// Two-stage closed-loop training, then perturbed evaluation.
    ClosedLoop,
    /// Perturbation kind x ratio x learner grid.
    Sweep,
    /// Writes a synthetic SPKD dataset.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long)]
        strength: Option<f64>,
        #[arg(long)]
        bins_per_session: Option<usize>,
    },
    /// Analytic per-step cost table.
    Report,
}

fn parse_learners(names: &[String]) -> Result<Vec<LearnerKind>> {
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(LearnerKind::ALL);
        } else {
            out.push(n.parse::<LearnerKind>().map_err(|e| HarnessError::config(format!("--learner: {e}")))?);
        }
    }
    out.dedup();
    Ok(out)
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !c.seeds.is_empty() {
        cfg.seeds = c.seeds.clone();
    }
    if let Some(out) = &c.out {
        cfg.paths.output = out.clone();
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(k) = &c.perturb_kind {
        cfg.perturbation.kind = k.parse::<PerturbationKind>().map_err(|e| HarnessError::config(format!("--perturb-kind: {e}")))?;
    }
    if let Some(r) = c.perturb_ratio {
        cfg.perturbation.ratio = r;
    }
    if let [one] = parse_learners(&c.learners)?.as_slice() {
        cfg.learner.kind = *one;
    }
    if c.dataset.is_some() {
        cfg.paths.dataset = c.dataset.clone();
    }
    if c.checkpoint.is_some() {
        cfg.paths.checkpoint = c.checkpoint.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds.first().copied().unwrap_or(0)
}

fn load_net(path: &Path) -> Result<DeepSnn<f64>> {
    DeepSnn::<f64>::load(path).map_err(|e| match e {
        spikebmi_core::Error::Io(err) => HarnessError::data(format!("checkpoint {}: {err}", path.display())),
        other => other.into(),
    })
}

fn dataset(cfg: &ExperimentConfig) -> Result<SpikeDataset> {
    match &cfg.paths.dataset {
        Some(p) => ingest_dataset(p),
        None => {
            let ol = &cfg.open_loop;
            synth_dataset_with(&ol.synth, first_seed(cfg), ol.n_sessions, ol.drift_strength)
        }
    }
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn pretrain_cmd(cfg: &ExperimentConfig, closed_loop: bool) -> Result<()> {
    let out = &cfg.paths.output;
    let seed = first_seed(cfg);
    let (ckpt, log) = if closed_loop {
        let s1 = stage1(cfg, seed, None)?;
        let ckpt = cfg.paths.checkpoint.clone().unwrap_or_else(|| out.join("closed_loop.snnw"));
        s1.net.save(&ckpt)?;
        (ckpt, output::training_log(&s1.log)?)
    } else {
        let ds = dataset(cfg)?;
        let (net, meta, report) = pretrain_open_loop(&ds, &cfg.open_loop, seed)?;
        let ckpt = cfg.paths.checkpoint.clone().unwrap_or_else(|| out.join("open_loop.snnw"));
        save_checkpoint(&net, &meta, &ckpt)?;
        println!("first-session R2 {:.4}", meta.train_session_r2);
        (ckpt, output::training_log(&report.epochs)?)
    };
    let log_path = out.join("training_log.jsonl");
    write_file(&log_path, &log)?;
    announce(&[ckpt, log_path]);
    Ok(())
}

fn open_loop_cmd(cfg: &ExperimentConfig, learners: &[LearnerKind]) -> Result<()> {
    let ds = dataset(cfg)?;
    let seed = first_seed(cfg);
    let (net, meta) = match cfg.paths.checkpoint.as_deref().filter(|p| p.exists()) {
        Some(p) => load_checkpoint(p)?,
        None => {
            let (net, meta, report) = pretrain_open_loop(&ds, &cfg.open_loop, seed)?;
            write_file(&cfg.paths.output.join("training_log.jsonl"), &output::training_log(&report.epochs)?)?;
            (net, meta)
        }
    };
    let learners = if learners.is_empty() { LearnerKind::ALL.to_vec() } else { learners.to_vec() };
    let runs = learners
        .iter()
        .map(|&k| {
            let rule = cfg.learner.rule(k, cfg.open_loop.n_classes, seed)?;
            run_open_loop(&net, &meta.codec, &ds, rule, cfg.open_loop.online_rate(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let written = output::write_open_loop(&cfg.paths.output, &runs, &meta)?;
    print!("{}", spikebmi_harness::open_loop::runs_csv(&runs));
    announce(&written);
    Ok(())
}

fn closed_loop_cmd(cfg: &ExperimentConfig, learners: &[LearnerKind]) -> Result<()> {
    let ckpt = cfg.paths.checkpoint.as_deref().map(load_net).transpose()?;
    let learners = if learners.is_empty() { vec![cfg.learner.kind] } else { learners.to_vec() };
    let out = run_closed_loop_for(cfg, ckpt.as_ref(), &learners)?;
    let summary = summarize(cfg, &out)?;
    let written = output::write_closed_loop(&cfg.paths.output, &out, &summary, cfg.env.max_duration)?;
    print!("{}", output::summary_csv(&summary));
    announce(&written);
    Ok(())
}

fn sweep_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let ckpt = cfg.paths.checkpoint.as_deref().map(load_net).transpose()?;
    let cells = run_sweep(cfg, ckpt.as_ref())?;
    let written = output::write_sweep(&cfg.paths.output, &cells)?;
    print!("{}", output::sweep_csv(&cells));
    announce(&written);
    Ok(())
}

fn report_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let csv = cost_csv(&cost_table(&cfg.network.layer_sizes, &cfg.report)?);
    let p = cfg.paths.output.join("cost_table.csv");
    write_file(&p, &csv)?;
    print!("{csv}");
    announce(&[p]);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let learners = parse_learners(&cli.common.learners)?;
    let cmd = cli.cmd.unwrap_or(match cfg.mode {
        Mode::Pretrain => Cmd::Pretrain { closed_loop: false },
        Mode::OpenLoop => Cmd::OpenLoop,
        Mode::ClosedLoop => Cmd::ClosedLoop,
        Mode::Sweep => Cmd::Sweep,
        Mode::Report => Cmd::Report,
    });
    if !matches!(cmd, Cmd::Synth { .. }) {
        write_file(&cfg.paths.output.join("config.toml"), &cfg.to_toml_string())?;
    }
    match cmd {
        Cmd::Pretrain { closed_loop } => pretrain_cmd(&cfg, closed_loop),
        Cmd::OpenLoop => open_loop_cmd(&cfg, &learners),
        Cmd::ClosedLoop => closed_loop_cmd(&cfg, &learners),
        Cmd::Sweep => sweep_cmd(&cfg),
        Cmd::Report => report_cmd(&cfg),
        Cmd::Synth { output, sessions, strength, bins_per_session } => {
            let mut sc = cfg.open_loop.synth.clone();
            if let Some(b) = bins_per_session {
                sc.bins_per_session = b;
            }
            let ds = synth_dataset_with(
                &sc,
                first_seed(&cfg),
                sessions.unwrap_or(cfg.open_loop.n_sessions),
                strength.unwrap_or(cfg.open_loop.drift_strength),
            )?;
            ds.save(&output)?;
            announce(&[output]);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
