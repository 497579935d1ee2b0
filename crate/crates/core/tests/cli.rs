use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_desing")
}

fn action(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/actions").join(format!("{name}.json"))
}

fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("DESING_THREADS", t.to_string());
    }
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_rejects_symmetric_generator() {
    let out = run(&["validate", "--action", action("bad_symmetric").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "InvalidGroup");
    assert_eq!(err["error"]["context"]["violations"][0]["kind"], "NonSkew");
}

#[test]
fn desingularize_axis_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("desing.json");
    let out = run(
        &["desingularize", "--action", action("s1_r3").to_str().unwrap(), "--grid", "10", "--out", out_path.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out_path);
    assert_eq!(v["stages"], 1);
    assert_eq!(v["orbit_dim"], 1);
}

#[test]
fn stage_limit_exit_code() {
    let out = run(&["desingularize", "--action", action("t2_r4").to_str().unwrap(), "--grid", "6", "--max-stages", "1"], None);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "StageLimitExceeded");
}

#[test]
fn gh_of_identical_matrices_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let gh = dir.path().join("gh.json");
    let out = run(&["quotient", "--action", action("s1_r2").to_str().unwrap(), "--samples", "40", "--out", x.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["gh", "--a", x.to_str().unwrap(), "--b", x.to_str().unwrap(), "--mode", "exact", "--out", gh.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&gh);
    assert_eq!(v["lower"].as_f64(), Some(0.0));
    assert_eq!(v["upper"].as_f64(), Some(0.0));
}

#[test]
fn floats_have_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    run(&["quotient", "--action", action("z2_r1").to_str().unwrap(), "--samples", "12", "--out", x.to_str().unwrap()], None);
    let text = std::fs::read_to_string(&x).unwrap();
    let cell = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn metric_checks_pass_on_axis_rotation() {
    for kind in ["submersion", "isometry", "nerve"] {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let out = run(
            &[
                "metric-check",
                "--action",
                action("s1_r3").to_str().unwrap(),
                "--grid",
                "8",
                "--kind",
                kind,
                "--tol",
                "1e-6",
                "--samples",
                "60",
                "--out",
                p.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&p)["pass"], true, "{kind}");
    }
}

#[test]
fn plots() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.json");
    let svg = dir.path().join("s.svg");
    run(&["stratify", "--action", action("s1_r3").to_str().unwrap(), "--grid", "10", "--out", s.to_str().unwrap()], None);
    let out = run(&["plot", "--input", s.to_str().unwrap(), "--out", svg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("codim 2") && text.contains("codim 3"));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let out = run(&["plot", "--input", empty.to_str().unwrap(), "--out", svg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(!std::fs::read_to_string(&svg).unwrap().contains("<circle"));

    let odd = dir.path().join("odd.json");
    std::fs::write(&odd, r#"{"report": "histogram"}"#).unwrap();
    let out = run(&["plot", "--input", odd.to_str().unwrap(), "--out", svg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for t in [1, 4] {
        let d = dir.path().join(format!("d{t}.json"));
        let x = dir.path().join(format!("x{t}.csv"));
        run(&["desingularize", "--action", action("so3_r3").to_str().unwrap(), "--grid", "8", "--out", d.to_str().unwrap()], Some(t));
        run(&["quotient", "--action", action("s1_r2").to_str().unwrap(), "--samples", "60", "--out", x.to_str().unwrap()], Some(t));
        texts.push((std::fs::read(&d).unwrap(), std::fs::read(&x).unwrap()));
    }
    assert!(texts[0] == texts[1]);
}
