use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn dkstn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dkstn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dkstn(args);
    assert!(
        out.status.success(),
        "dkstn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn stages_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();

    ok(&["synth", "--config", cfg, "--out", &p("re.dkg")]);
    ok(&["synth", "--config", cfg, "--model", "--out", &p("mo.dkg")]);
    ok(&["preprocess", "--input", &p("re.dkg"), "--output", &p("re_anom.dkg"), "--fit-out", &p("fit.dkw")]);
    ok(&["preprocess", "--input", &p("mo.dkg"), "--output", &p("mo_anom.dkg"), "--fit-in", &p("fit.dkw")]);
    ok(&[
        "labels", "--anomalies", &p("re_anom.dkg"), "--basis-out", &p("basis.dkw"), "--labels-out", &p("labels.csv"),
    ]);
    ok(&[
        "train", "--data", &p("re_anom.dkg"), "--model-data", &p("mo_anom.dkg"), "--labels", &p("labels.csv"),
        "--config", cfg, "--checkpoint-out", &p("model.dkw"), "--log", &p("log.csv"), "--fit", &p("fit.dkw"),
        "--basis", &p("basis.dkw"),
    ]);
    let log = std::fs::read_to_string(p("log.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,valid_loss\n"));
    assert_eq!(log.lines().count(), 1 + 1 + 2);

    ok(&["predict", "--checkpoint", &p("model.dkw"), "--data", &p("re_anom.dkg"), "--out", &p("fc.csv")]);
    assert!(std::fs::read_to_string(p("fc.csv")).unwrap().starts_with("anchor,lead,rmm1,rmm2"));
    ok(&["predict", "--checkpoint", &p("model.dkw"), "--data", &p("re.dkg"), "--raw", "--out", &p("raw.csv")]);
    assert_eq!(std::fs::read_to_string(p("raw.csv")).unwrap().lines().count(), 1 + 4);

    ok(&[
        "eval", "--pred", &p("fc.csv"), "--truth", &p("labels.csv"), "--out-csv", &p("skill.csv"), "--seasonal",
    ]);
    let skill = std::fs::read_to_string(p("skill.csv")).unwrap();
    assert!(skill.starts_with("lead,cor,rmse,ae,pe\n"));
    assert!(skill.contains("\nskill_days_combined,"), "{skill}");

    ok(&["extend", "--checkpoint", &p("model.dkw"), "--extra-days", "3", "--out", &p("ext.dkw")]);
    let text = ok(&["inspect", "--checkpoint", &p("ext.dkw")]);
    assert!(text.contains("n_extended = 7"), "{text}");
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = dkstn(&["all"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[taam]\nk = 3\nhiden = 8\n").unwrap();
    let out = dkstn(&["all", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("dkstn: error:"), "{err}");
    assert!(err.contains("hiden"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn corrupted_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("junk.dkw");
    std::fs::write(&ck, b"NOPE and some bytes").unwrap();
    let out = dkstn(&["inspect", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("dkstn: error:") && err.contains("magic"), "{err}");
}
