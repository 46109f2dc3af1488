use std::process::{Command, Output};

fn safer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safer"))
        .args(args)
        .env_remove("SAFER_CONFIG")
        .env_remove("SAFER_SET")
        .env_remove("SAFER_SEED")
        .output()
        .expect("run safer")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_config_exit_status() {
    let ok = safer(&["validate-config"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = safer(&["validate-config", "--set", "gate.beta=1"]);
    assert!(!bad.status.success());

    let warn = safer(&["validate-config", "--json", "--set", "search.gamma=0.2"]);
    assert!(warn.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&warn)).unwrap();
    assert_eq!(report["granularity_ratio"], 2.0);
}

#[test]
fn config_file_with_dotted_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{ "gate": { "beta": 2.5 }, "search.n_v": 40 }"#).unwrap();
    let o = safer(&["--config", path.to_str().unwrap(), "validate-config"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&path, r#"{ "gate.bta": 2.5 }"#).unwrap();
    let o = safer(&["--config", path.to_str().unwrap(), "validate-config"]);
    assert!(!o.status.success());
}

#[test]
fn eval_is_reproducible() {
    let args = [
        "eval",
        "--method",
        "nosafety,aeb",
        "--scenario",
        "open_corridor",
        "--trials",
        "2",
        "--seed",
        "3",
        "--no-timing",
    ];
    let a = safer(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("method,scenario,trials,successes"));
    assert!(lines[1].starts_with("nosafety,open_corridor,2,"));
    assert!(lines[2].starts_with("aeb,open_corridor,2,"));
    assert_eq!(text, stdout(&safer(&args)));

    let missing = safer(&["eval", "--method", "safer", "--scenario", "open_corridor"]);
    assert!(!missing.status.success());
}
