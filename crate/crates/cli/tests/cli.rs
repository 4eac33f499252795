use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
master_seed = 7

[env]
episode_len = 8

[training]
episodes = 3
warmup_steps = 10
batch_size = 4
hidden = [6]

[distill]
epochs = 2
buffer_steps = 40
batch_size = 4
hidden = [6]

[eval]
steps = 16
seeds = 1
"#;

fn xapp(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xapp"));
    cmd.args(args).env_remove("XAPP_OUT_DIR");
    if let Some(out) = out {
        cmd.env("XAPP_OUT_DIR", out);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_lists_every_stage() {
    let out = xapp(&["--help"], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for stage in [
        "train-teachers",
        "collect",
        "distill",
        "evaluate",
        "baseline-individual",
        "baseline-team",
        "report",
        "pipeline",
    ] {
        assert!(text.contains(stage), "{stage} missing from help");
    }
}

#[test]
fn missing_prerequisite_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = xapp(&["distill", "--config", &cfg], Some(&dir.path().join("run")));
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("buffer.bin") && err.contains("collect"), "{err}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[env]\nnum_users = 0\n");
    let out = xapp(&["train-teachers", "--config", &cfg], Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "not toml at all = = =");
    assert_eq!(xapp(&["report", "--config", &cfg], Some(dir.path())).status.code(), Some(2));
}

#[test]
fn pipeline_then_strict_rerun_with_new_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let run = dir.path().join("run");
    let out = xapp(&["pipeline", "--config", &cfg, "--sequential"], Some(&run));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("distilled") && stdout.contains("team"), "{stdout}");
    assert!(run.join("report_summary.csv").is_file());
    assert!(run.join("rep_0/eval/individual_outage.csv").is_file());

    let out = xapp(&["collect", "--config", &cfg, "--seed", "8", "--strict"], Some(&run));
    assert_eq!(out.status.code(), Some(2));
    let out = xapp(&["collect", "--config", &cfg, "--seed", "8"], Some(&run));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn out_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let flag = dir.path().join("flag");
    let out = xapp(
        &["train-teachers", "--config", &cfg, "--out", flag.to_str().unwrap()],
        Some(&dir.path().join("env")),
    );
    assert!(out.status.success());
    assert!(flag.join("rep_0/teachers/xapp1.json").is_file());
    assert!(!dir.path().join("env").exists());
}
