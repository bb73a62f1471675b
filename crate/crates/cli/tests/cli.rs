use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_capalloc"));
    c.env("RUST_LOG", "info");
    c
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    let text = format!(
        r#"
name = "tiny"
copula = {{ family = "clayton", theta = 1.0, dim = 3 }}
alphas = [0.5, 0.9, 0.95]
targets = [0.95]
n_mc = 40
n_is = 200
n_repetitions = 3
out = "{}"

[smc]
n_particles = 30

[quantiles]
n_per_run = 2000
n_runs = 3
"#,
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let o = run(&["run", "--bogus"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "copula = { family = \"clayton\", theta = 1.0, dim = 2 }\ntargets = [0.42]\n").unwrap();
    assert_eq!(code(&run(&["run", "--config", p.to_str().unwrap()])), 2);
    std::fs::write(&p, "nonsense = 1\n").unwrap();
    assert_eq!(code(&run(&["quantiles", "--config", p.to_str().unwrap()])), 2);
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["report", "--out", dir.path().to_str().unwrap()])), 3);
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let c = cfg.to_str().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let o = run(&["run", "--config", c, "--seed", "42", "--out", out_a.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.json", "curves.csv", "runs.csv", "timings.csv", "quantiles.json"] {
        assert!(out_a.join(f).exists(), "{f} missing");
    }
    let o = run(&["run", "--config", c, "--seed", "42", "--out", out_b.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code(&o), 0);
    let a = std::fs::read(out_a.join("runs.csv")).unwrap();
    let b = std::fs::read(out_b.join("runs.csv")).unwrap();
    assert_eq!(a, b);
    // 3 reps × 3 methods × 1 alpha × (3 cells + ES), plus header
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 3 * 3 * 4);

    let before: serde_json::Value = serde_json::from_slice(&std::fs::read(out_a.join("metrics.json")).unwrap()).unwrap();
    let o = run(&["report", "--out", out_a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let after: serde_json::Value = serde_json::from_slice(&std::fs::read(out_a.join("metrics.json")).unwrap()).unwrap();
    let means = |v: &serde_json::Value| v["entries"].as_array().unwrap().iter().map(|e| e["mean"].as_f64().unwrap()).collect::<Vec<_>>();
    for (x, y) in means(&before).iter().zip(means(&after)) {
        assert!((x - y).abs() <= 1e-12 * x.abs());
    }
}

#[test]
fn quantiles_are_reused_on_second_call() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let c = cfg.to_str().unwrap();
    let first = run(&["quantiles", "--config", c]);
    assert_eq!(code(&first), 0);
    assert!(!String::from_utf8_lossy(&first.stderr).contains("reusing"));
    let second = run(&["quantiles", "--config", c]);
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stderr).contains("reusing"));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn allocate_prints_a_full_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    for m in ["mc", "smc", "is_ach", "stddev"] {
        let o = run(&["allocate", "--config", cfg.to_str().unwrap(), "--method", m, "--alpha", "0.95"]);
        assert_eq!(code(&o), 0, "{m}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let sum: f64 = v["contributions"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        let total = v["total"].as_f64().unwrap();
        assert!((sum - total).abs() <= 1e-9 * total.abs());
    }
}

#[test]
fn curvature_on_frank_setup() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/frank2.toml");
    let o = run(&["curvature", "--config", cfg.to_str().unwrap(), "--B", "46", "--points", "19"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u_1,u_others,u_last,convex");
    assert_eq!(lines.len(), 20);
    assert!(lines[1..].iter().any(|l| l.ends_with("true")));
    assert!(lines[1..].iter().any(|l| l.ends_with("false")));
}
