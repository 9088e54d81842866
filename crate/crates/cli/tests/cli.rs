use std::path::Path;
use std::process::{Command, Output};

fn gflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn version_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = gflow(&["--version"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("gflow "));
}

#[test]
fn inner_radius_beyond_compressed_radius_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[partition]\ninner_radius = 50.0\n[compress]\ninner_radius = 50.0\n",
    )
    .unwrap();
    let out = gflow(
        &["run", "--config", "bad.toml", "--input", "missing.xyzl", "--mode", "evaluate", "--oracle"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `config`"));
}

#[test]
fn missing_input_fails_at_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let out = gflow(
        &["run", "--input", "missing.xyzl", "--mode", "evaluate", "--oracle"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `ingest`"));
}

#[test]
fn unknown_mode_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gflow(&["run", "--input", "x.xyzl", "--mode", "fly"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hag_appends_channels() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.xyzl"),
        "0 0 0 2\n10 0 0 2\n0 10 0 2\n10 10 0 2\n5 5 4 1\n",
    )
    .unwrap();
    ok(&gflow(&["hag", "--input", "c.xyzl", "--out", "h.xyzl"], dir.path()));
    let text = String::from_utf8(read(dir.path(), "h.xyzl")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("hag_meters") && header.contains("hag_bin"));
    assert!(lines.last().unwrap().ends_with("4 5"));
}

#[test]
fn staged_commands_reproduce_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gflow(
        &["--seed", "7", "synth", "--preset", "urban", "--out", "scene.gfb", "--truth-dtm", "truth.asc"],
        d,
    ));
    ok(&gflow(
        &[
            "--jobs", "2", "run", "--input", "scene.gfb", "--mode", "evaluate", "--oracle",
            "--reference-dtm", "truth.asc", "--work-dir", "work",
        ],
        d,
    ));
    ok(&gflow(&["partition", "--input", "scene.gfb", "--out", "patches"], d));
    ok(&gflow(&["compress", "--patches", "patches", "--roc", "44", "--out", "compressed"], d));
    ok(&gflow(&["predict", "--compressed", "compressed", "--oracle", "--out", "pred"], d));
    ok(&gflow(&["merge", "--pred", "pred", "--cloud", "scene.gfb", "--out", "labeled.gfb"], d));
    ok(&gflow(
        &[
            "evaluate", "--pred", "labeled.gfb", "--truth", "scene.gfb", "--dtm-cell", "1.0",
            "--reference-dtm", "truth.asc", "--report", "report.json",
        ],
        d,
    ));

    for stage in ["partition", "compress", "pred"] {
        let theirs = if stage == "partition" { "patches" } else if stage == "compress" { "compressed" } else { stage };
        assert_eq!(
            read(&d.join("work").join(stage), "manifest.json"),
            read(&d.join(theirs), "manifest.json"),
            "{stage}"
        );
    }
    assert_eq!(read(&d.join("work"), "labeled.gfb"), read(d, "labeled.gfb"));

    let run: serde_json::Value = serde_json::from_slice(&read(&d.join("work"), "report.json")).unwrap();
    let staged: serde_json::Value = serde_json::from_slice(&read(d, "report.json")).unwrap();
    assert_eq!(run["evaluation"], staged);
    assert_eq!(staged["metrics"]["oa"], 1.0);
    assert!(staged["dtm"]["rmse"].as_f64().unwrap() <= 0.05);
}

#[test]
fn train_then_predict_with_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("quick.toml"), "[train]\nepochs = 3\nmax_samples = 2000\n").unwrap();
    ok(&gflow(&["--seed", "1", "synth", "--preset", "mixed", "--out", "a.gfb"], d));
    ok(&gflow(
        &["train-toy", "--config", "quick.toml", "--input", "a.gfb", "--out", "m.gfck", "--report", "t.json"],
        d,
    ));
    let t: serde_json::Value = serde_json::from_slice(&read(d, "t.json")).unwrap();
    assert_eq!(t["samples"], 2000);
    ok(&gflow(
        &["run", "--config", "quick.toml", "--input", "a.gfb", "--mode", "predict", "--model", "m.gfck", "--work-dir", "w"],
        d,
    ));
    assert!(d.join("w/labeled.gfb").exists());

    // a checkpoint trained on another recipe is refused
    std::fs::write(d.join("other.toml"), "[features]\ncontext_sizes = [8.0]\n").unwrap();
    let out = gflow(
        &["run", "--config", "other.toml", "--input", "a.gfb", "--mode", "predict", "--model", "m.gfck"],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
}
