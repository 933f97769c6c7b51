use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fastslow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastslow"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"model\": \"chialvo\",\n  \"eps\": oops\n}").unwrap();
    let out = dir.path().join("out");
    let res = fastslow(&out, &["--config", cfg.to_str().unwrap(), "analyze"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_and_models_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"model": "chialvo", "epsilon": 0.001}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(fastslow(&out, &["--config", cfg.to_str().unwrap(), "analyze"]).status.code(), Some(2));
    assert_eq!(fastslow(&out, &["singularities", "--model", "nope"]).status.code(), Some(2));
    assert_eq!(fastslow(&out, &["regimes", "--case", "V"]).status.code(), Some(2));
    assert_eq!(fastslow(&out, &["reduced", "--eps", "0.01", "--m", "200"]).status.code(), Some(2));
    assert_eq!(fastslow(&out, &["no-such-command"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn analyze_reports_folds_and_flip_with_schema() {
    let dir = tempfile::tempdir().unwrap();
    let res = fastslow(dir.path(), &["analyze"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rep = json(&dir.path().join("analyze.json"));
    assert_eq!(rep["schema"], 1);
    let kinds: Vec<&str> = rep["singularities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["Fold", "Fold", "Flip"]);
}

#[test]
fn every_output_carries_schema_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--steps", "50"][..],
        &["slow-manifold"],
        &["singularities"],
        &["reduced", "--steps", "5"],
        &["regimes", "--case", "II", "--steps", "2000"],
        &["euler-study", "--eps", "0,0.02", "--h", "0.2"],
        &["poincare", "--samples", "5"],
        &["oracle"],
    ] {
        let res = fastslow(dir.path(), args);
        assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let mut seen = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => assert!(text.starts_with("# schema: 1\n"), "{}", path.display()),
            Some("json") => assert_eq!(json(&path)["schema"], 1, "{}", path.display()),
            other => panic!("unexpected file {other:?}"),
        }
        seen += 1;
    }
    assert_eq!(seen, 13);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "reduced", "--random", "3", "--steps", "5"];
    for d in [&a, &b] {
        assert!(fastslow(d.path(), &args).status.success());
    }
    let b1 = fastslow(b.path(), &["--threads", "1", "euler-study", "--eps", "0.04,0.02", "--h", "0.4,0.2"]);
    let a4 = fastslow(a.path(), &["--threads", "4", "euler-study", "--eps", "0.04,0.02", "--h", "0.4,0.2"]);
    assert!(a4.status.success() && b1.status.success());
    for name in ["reduced.csv", "reduced.json", "euler_study.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_changes_random_base_points() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    fastslow(a.path(), &["--seed", "1", "reduced", "--base-grid", "0", "--random", "2", "--steps", "1"]);
    fastslow(b.path(), &["--seed", "2", "reduced", "--base-grid", "0", "--random", "2", "--steps", "1"]);
    assert_ne!(json(&a.path().join("reduced.json"))["bases"], json(&b.path().join("reduced.json"))["bases"]);
}

#[test]
fn euler_study_at_zero_eps_has_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let res = fastslow(dir.path(), &["euler-study", "--eps", "0", "--h", "0.4,0.1"]);
    assert!(res.status.success());
    let csv = fs::read_to_string(dir.path().join("euler_study.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let distance: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(distance, 0.0);
    }
}

#[test]
fn csv_numbers_have_17_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fastslow(dir.path(), &["simulate", "--steps", "3"]).status.success());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("1,")).unwrap();
    let w = row.split(',').nth(1).unwrap();
    let mantissa = w.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
}

#[test]
fn oracle_passes_for_chialvo_and_rejects_models_without_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fastslow(dir.path(), &["oracle"]).status.success());
    assert_eq!(json(&dir.path().join("oracle.json"))["pass"], true);
    let other = dir.path().join("other");
    assert_eq!(fastslow(&other, &["oracle", "--model", "synthetic:saddle"]).status.code(), Some(2));
}
