use std::path::Path;
use std::process::{Command, Output};

use spikebmi_harness::ExperimentConfig;

fn spikebmi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikebmi")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path) -> String {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = vec![3];
    cfg.trials = 4;
    cfg.perturbation.onset_trial = 2;
    cfg.stage1.demonstration_trials = 4;
    cfg.stage1.pretrain.epochs = 1;
    cfg.learner.stage2.trials = 2;
    cfg.open_loop.n_sessions = 2;
    cfg.open_loop.synth.bins_per_session = 600;
    cfg.open_loop.pretrain.epochs = 1;
    cfg.open_loop.sequence_bins = 100;
    let p = dir.join("small.toml");
    std::fs::write(&p, cfg.to_toml_string()).unwrap();
    p.display().to_string()
}

#[test]
fn report_prints_cost_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = spikebmi(dir.path(), &["report", "--out", "r"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("DSNN,24.544,113.00,2590.00,2590.00,0.00,0.00"), "{stdout}");
    assert!(dir.path().join("r/cost_table.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v9.toml"), "version = 9\n").unwrap();
    assert_eq!(code(&spikebmi(dir.path(), &["--config", "v9.toml", "report"])), 2);
    std::fs::write(dir.path().join("extra.toml"), "version = 1\nnope = true\n").unwrap();
    assert_eq!(code(&spikebmi(dir.path(), &["--config", "extra.toml", "report"])), 2);
    assert_eq!(code(&spikebmi(dir.path(), &["--config", "missing.toml", "report"])), 2);
    assert_eq!(code(&spikebmi(dir.path(), &["closed-loop", "--learner", "sgd"])), 2);
    assert_eq!(code(&spikebmi(dir.path(), &["closed-loop", "--perturb-ratio", "2"])), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(code(&spikebmi(dir.path(), &["--config", &cfg, "synth", "--output", "d.spkd"])), 0);
    let bytes = std::fs::read(dir.path().join("d.spkd")).unwrap();
    std::fs::write(dir.path().join("cut.spkd"), &bytes[..bytes.len() - 5]).unwrap();
    let o = spikebmi(dir.path(), &["--config", &cfg, "open-loop", "--dataset", "cut.spkd"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&spikebmi(dir.path(), &["--config", &cfg, "open-loop", "--dataset", "absent.spkd"])), 3);
    assert_eq!(code(&spikebmi(dir.path(), &["--config", &cfg, "closed-loop", "--checkpoint", "absent.snnw"])), 3);
}

#[test]
fn open_loop_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(code(&spikebmi(dir.path(), &["--config", &cfg, "synth", "--output", "d.spkd"])), 0);
    let o = spikebmi(dir.path(), &["--config", &cfg, "pretrain", "--dataset", "d.spkd", "--checkpoint", "ol.snnw", "--out", "p"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("p/training_log.jsonl").exists());
    let o = spikebmi(dir.path(), &["--config", &cfg, "open-loop", "--dataset", "d.spkd", "--checkpoint", "ol.snnw", "--out", "e"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("e/open_loop.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2, "{csv}");
}

#[test]
fn closed_loop_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for out in ["a", "b"] {
        let o = spikebmi(dir.path(), &["--config", &cfg, "closed-loop", "--learner", "all", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trials.jsonl", "trials_seed3.jsonl", "summary.csv", "stage1_log.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty() && a == b, "{f}");
    }
    let trials = std::fs::read_to_string(dir.path().join("a/trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 3 * 4);
}

#[test]
fn mode_from_config_selects_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.toml"), "version = 1\nmode = \"report\"\n").unwrap();
    let o = spikebmi(dir.path(), &["--config", "r.toml", "--out", "x"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("x/cost_table.csv").exists());
}
