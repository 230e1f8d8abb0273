use lagrange_coupling::harness::{
    render, run_study, Format, HarnessError, Study, StudyConfig, Value,
};

const SWEEP: &str = r#"
name = "small sweep"

[scenario]
kind = "grid2d"
subdomains = [2, 2]
h = 0.0833333333333333
case = "sin_sin"

[stabilization]
enabled = true
gamma = 1.0
coarsen = 3

[sweep]
ratios = [1.0, 3.0]
reference_ratio = 3.0
"#;

fn sweep() -> lagrange_coupling::harness::ExperimentReport {
    run_study(Study::Sweep, &StudyConfig::from_toml_str(SWEEP).unwrap()).unwrap()
}

#[test]
fn matching_multiplier_and_primal_meshes_lose_stability() {
    let report = sweep();
    let one = report.record("ratio 1").unwrap();
    assert!(!one.passed());
    assert!(one.get("coercivity").unwrap() <= 1e-10);
    let three = report.record("ratio 3").unwrap();
    assert!(three.passed(), "{}", three.message);
    assert!(three.get("coercivity").unwrap() > 1e-3);
    assert_eq!(report.summary_value("stability_boundary"), Some(&Value::Float(3.0)));
}

#[test]
fn stabilization_rescues_the_unstable_pairing() {
    let report = sweep();
    let rescued = report.record("ratio 1 stabilized").unwrap();
    assert!(rescued.passed(), "{}", rescued.message);
    assert!(rescued.get("coercivity").unwrap() > 1e-10);
    let ratio = report.summary_value("max_stabilized_error_ratio").and_then(Value::as_f64).unwrap();
    assert!(ratio <= 2.0, "{ratio}");
}

#[test]
fn tables_are_reproducible() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../harness/configs/oracle.toml")).unwrap();
    let cfg = StudyConfig::from_toml_str(&text).unwrap();
    let a = render(&run_study(Study::Oracle, &cfg).unwrap(), Format::Table).unwrap();
    let b = render(&run_study(Study::Oracle, &cfg).unwrap(), Format::Table).unwrap();
    assert_eq!(a, b);
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("label,status,h,"));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn structured_output_round_trips() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../harness/configs/fracture_star.toml")).unwrap();
    let report = run_study(Study::Fracture, &StudyConfig::from_toml_str(&text).unwrap()).unwrap();
    assert!(report.passed());
    let json: serde_json::Value = serde_json::from_str(&render(&report, Format::Structured).unwrap()).unwrap();
    let rows = json["records"].as_array().unwrap();
    assert_eq!(rows.len(), report.records.len());
    let u = rows[0]["metrics"]["junction_value"].as_f64().unwrap();
    assert_eq!(u, report.records[0].get("junction_value").unwrap());
}

fn config_error(text: &str, study: Study) -> String {
    let err = StudyConfig::from_toml_str(text).and_then(|c| run_study(study, &c).map(|_| ()));
    match err {
        Err(HarnessError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let base = "name = \"x\"\n[scenario]\nkind = \"chain1d\"\nsubdomains = [2]\ncase = \"cubic\"\n";
    assert_eq!(config_error(&format!("{base}h = 0.25\nkappa = [-1.0]\n[converge]\ndivisions = [4, 8, 16]\n"), Study::Converge), "scenario.kappa");
    assert_eq!(config_error(&format!("{base}h = 0.25\n[converge]\ndivisions = [4, 8]\n"), Study::Converge), "converge.divisions");
    assert_eq!(config_error(&format!("{base}h = 0.25\n"), Study::Sweep), "sweep");
    assert_eq!(config_error(&format!("{base}h = 0.25\nmesh = 3\n"), Study::Converge), "<file>");
}
