use std::fs;
use std::path::Path;
use std::process::Command;

use affect_core::pipeline::{
    generate, run_eeg_features, run_evaluate, run_pipeline, PipelineConfig, SynthOptions,
    CONFIG_FILE, EEG_PSD_CSV, EVAL_REPORT_JSON, LABELS_CSV, RUN_SUMMARY_JSON,
};

fn small(dir: &Path, situations: usize, seed: u64) -> PipelineConfig {
    let opts = SynthOptions {
        situations,
        frames: 150,
        width: 128,
        height: 96,
        seed,
        ..SynthOptions::default()
    };
    generate(dir, &opts).unwrap();
    PipelineConfig::load(&dir.join(CONFIG_FILE)).unwrap()
}

#[test]
fn two_situations_complete_with_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("data"), 2, 3);
    let out = dir.path().join("out");
    let report = run_pipeline(&cfg, &out).unwrap();
    assert!(report.success(), "{:?}", report.failures);
    assert_eq!(report.situations.len(), 2);
    assert!(report.situations.iter().all(|s| s.completed));

    let eval = report.eval.expect("ratings were configured");
    assert_eq!(eval.situations.len(), 2);
    let rmse = eval.rmse.unwrap();
    assert!(rmse.valence >= 0.0 && rmse.valence <= 6.0);
    assert!(out.join(EVAL_REPORT_JSON).is_file());
    assert!(out.join(RUN_SUMMARY_JSON).is_file());

    // Evaluation alone rereads the written labels and band powers.
    let again = run_evaluate(&cfg, &out).unwrap();
    assert_eq!(again.rmse, eval.rmse);
}

#[test]
fn eeg_only_run_matches_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("data"), 1, 4);
    let full = dir.path().join("full");
    let eeg = dir.path().join("eeg");
    run_pipeline(&cfg, &full).unwrap();
    let r = run_eeg_features(&cfg, &eeg).unwrap();
    assert!(r.success());
    let id = &cfg.situations[0].id;
    assert_eq!(
        fs::read(full.join(id).join(EEG_PSD_CSV)).unwrap(),
        fs::read(eeg.join(id).join(EEG_PSD_CSV)).unwrap()
    );
    assert!(!eeg.join(id).join(LABELS_CSV).exists());
}

#[test]
fn missing_frames_fail_one_situation_with_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut cfg = small(&data, 2, 5);
    cfg.situations[1].frames = data.join("nowhere");
    let out = dir.path().join("out");
    let report = run_pipeline(&cfg, &out).unwrap();
    assert!(!report.success());
    assert_eq!(report.failures.len(), 1);
    let f = &report.failures[0];
    assert_eq!(f.situation, cfg.situations[1].id);
    assert_eq!(f.stage, "load");
    assert!(f.message.contains("nowhere"), "{}", f.message);
    assert!(report.situations[0].completed);
    assert!(out.join(&cfg.situations[0].id).join(LABELS_CSV).is_file());
}

#[test]
fn cli_exits_nonzero_on_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut cfg = small(&data, 1, 6);
    cfg.situations[0].frames = data.join("nowhere");
    let cfg_path = dir.path().join("broken.json");
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_affect"))
        .args(["compute", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("[load]"), "{stderr}");
    assert!(stderr.contains("0/1 situations completed"), "{stderr}");
}

#[test]
fn cli_rejects_missing_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_affect"))
        .args(["evaluate", "--config"])
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let err = PipelineConfig::from_json(r#"{"situations": [], "fpss": 30}"#).unwrap_err();
    assert!(err.to_string().contains("fpss"), "{err}");
}
