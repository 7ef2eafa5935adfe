use std::path::Path;
use std::process::{Command, Output};

fn mmfld(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmfld"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn small_run(cwd: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["run", "figure1-beta0", "--particles", "200", "--steps", "6", "--out-dir", out];
    args.extend_from_slice(extra);
    mmfld(&args, cwd)
}

#[test]
fn run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let ok = small_run(dir.path(), "a", &["--dump-particles"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    for file in ["a/metrics.csv", "a/summary.json", "a/particles.csv"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    assert!(small_run(dir.path(), "b", &["--sampler", "projected-mfld"]).status.success());
    let cmp = mmfld(&["compare", "a", "b/summary.json"], dir.path());
    assert!(cmp.status.success());
    let json: serde_json::Value = serde_json::from_slice(&cmp.stdout).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    assert!(json["winner_final_f"].is_string());
}

#[test]
fn config_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "seed = 1\n[domain]\nkind = \"simplex\"\ndim = 3\n[objective]\nkind = \"linear\"\nalpha = [2.0, 2.0, 2.0]\nref_lambda = 0.1\n[sampler]\nkind = \"mmfld\"\neta = -1.0\nlamda = 0.1\nsteps = 3\nparticles = 10\n",
    )
    .unwrap();
    let out = mmfld(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sampler.lamda") && err.contains("\"lambda\""), "{err}");
    assert_eq!(small_run(dir.path(), "x", &["--sampler", "langevin"]).status.code(), Some(2));

    assert!(small_run(dir.path(), "a", &[]).status.success());
    let args = ["run", "dirichlet", "--particles", "50", "--steps", "2", "--out-dir", "d"];
    assert!(mmfld(&args, dir.path()).status.success());
    let mismatch = mmfld(&["compare", "a", "d"], dir.path());
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    assert_eq!(small_run(dir.path(), "blocker/run", &[]).status.code(), Some(3));
    assert_eq!(mmfld(&["run", "no-such-config.toml"], dir.path()).status.code(), Some(3));
}

#[test]
fn bounds_oracle_and_selfcheck() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.toml"), "c1 = 1.0\nc2 = 4.0\nD = 1.0\nt = 1e-3\nk = 500\n").unwrap();
    let out = mmfld(&["bounds", "b.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let det = json["hessian_growth"]["deterministic"].as_f64().unwrap();
    assert!((det - std::f64::consts::E).abs() < 1e-12);

    std::fs::write(dir.path().join("typo.toml"), "etta = 1.0\n").unwrap();
    assert_eq!(mmfld(&["bounds", "typo.toml"], dir.path()).status.code(), Some(2));

    let out = mmfld(&["oracle", "figure1-beta0", "--out-dir", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let export: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/oracle.json")).unwrap()).unwrap();
    assert!(export["residual"].as_f64().unwrap() < 1e-6);

    let out = mmfld(&["selfcheck", "--samples", "100"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}
