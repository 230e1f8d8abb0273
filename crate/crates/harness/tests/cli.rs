use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn harness(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coupling-harness")).args(args).output().expect("harness runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn passing_study_exits_zero_and_prints_a_table() {
    let out = harness(&["fracture", "--config", &config("fracture_star.toml")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("label,status,"));
    assert!(header.contains("junction_value"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn tables_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = harness(&["converge", "--config", &config("converge_chain1d.toml"), "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stderr).contains("report written to"));
    }
    let read = |d: &Path| std::fs::read(d.join("converge.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn structured_output_records_the_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness(&[
        "oracle",
        "--config",
        &config("oracle.toml"),
        "--format",
        "structured",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("oracle.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["seed"], 11);
    assert_eq!(json["passed"], true);
    assert_eq!(json["records"].as_array().unwrap().len(), 4);
}

#[test]
fn failed_runs_exit_one() {
    // δ/h = 1 loses stability by design.
    let out = harness(&["sweep", "--config", &config("sweep_grid2d.toml")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("failed: ratio 1:"), "{err}");
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("ratio 1 stabilized,pass,")));
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\nmesh_size = 1\n[scenario]\nkind = \"chain1d\"\nh = 0.25\ncase = \"cubic\"\n")
        .unwrap();
    let out = harness(&["converge", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh_size"));

    let out = harness(&["converge", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // A valid file for the wrong study.
    let out = harness(&["fracture", "--config", &config("oracle.toml")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.kind"));
}
