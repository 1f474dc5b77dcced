use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fixop"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).env_remove("FP_SEED").output().unwrap()
}

#[test]
fn params_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["params", "nu", "3", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "4");

    let o = run_in(dir.path(), &["params", "gamma", "-1", "-1"]);
    assert_eq!(stdout(&o).trim(), "-0.5");

    let o = run_in(dir.path(), &["params", "chain", "-2", "0.4", "-2"]);
    assert!(o.status.success());
    let g: f64 = stdout(&o).trim().parse().unwrap();
    assert!((g - 2.0 / 3.0).abs() < 1e-15);

    let o = run_in(dir.path(), &["params", "chain", "-1", "0.3333333333333333", "-1"]);
    assert!(!o.status.success());

    let o = run_in(dir.path(), &["params", "nu", "2", "2"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("no solution"));
}

#[test]
fn nu_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["params", "nu-grid", "--min", "0.1", "--max", "3.9", "--step", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,mu,nu"));
    assert_eq!(lines.count(), 39 * 39);
}

#[test]
fn bundled_figures_converge_and_are_reproducible() {
    for name in ["fig2.toml", "fig3.toml", "moudafi.toml"] {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = config(name);
        let o1 = run_in(d1.path(), &["run", cfg.to_str().unwrap()]);
        assert!(o1.status.success(), "{name}: {}", stderr(&o1));
        let o2 = run_in(d2.path(), &["run", "--parallel", cfg.to_str().unwrap()]);
        assert!(o2.status.success(), "{name}: {}", stderr(&o2));
        assert_eq!(stdout(&o1), stdout(&o2));
        let mut files: Vec<_> = std::fs::read_dir(d1.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            let a = std::fs::read(d1.path().join("out").join(&f)).unwrap();
            let b = std::fs::read(d2.path().join("out").join(&f)).unwrap();
            assert_eq!(a, b, "{name}: {f:?} differs between runs");
        }
    }
}

#[test]
fn fig2_trace_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["run", config("fig2.toml").to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("dr: status=Converged"));
    assert!(out.contains("raspc: status=Converged"));
    let csv = std::fs::read_to_string(dir.path().join("out/fig2_raspc.csv")).unwrap();
    assert!(csv.starts_with("k,residual,step,dist_to_ref,x_0,x_1\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/fig2_dr.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "Converged");
    assert_eq!(json["config"]["methods"][1]["lambda"], 3.0);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "x0 = [1.0, 0.0]\n[stopping]\nresidual_tol = 1e-8\nmax_iters = 5\n\
         [problem.sets.A]\nkind = \"hyperplane\"\nnormal = [0.0, 1.0]\noffset = 0.0\n\
         [[methods]]\nname = \"r\"\nkind = \"raspc\"\na = \"A\"\nb = \"A\"\nlambda = 3.0\n",
    )
    .unwrap();
    let o = run_in(dir.path(), &["run", "bad.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));

    std::fs::write(
        &path,
        "x0 = [1.0, 0.0]\n[stopping]\nresidual_tol = 1e-8\nmax_iters = 5\n\
         [problem.sets.A]\nkind = \"hyperplane\"\nnormal = [0.0, 1.0]\noffset = 0.0\n\
         [[methods]]\nname = \"r\"\nkind = \"raspc\"\na = \"A\"\nb = \"A\"\nlambda = 3.0\nmu = 2.0\n",
    )
    .unwrap();
    let o = run_in(dir.path(), &["run", "bad.toml"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("methods[0]") && err.contains("lambda * mu"), "{err}");
}

#[test]
fn max_iters_fails_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let body = "x0 = [0.3, 0.7]\n[stopping]\nresidual_tol = 1e-8\nmax_iters = 20\n\
                [problem.sets.A]\nkind = \"hyperplane\"\nnormal = [0.0, 1.0]\noffset = 0.0\n\
                [problem.sets.B]\nkind = \"hyperplane\"\nnormal = [0.0, 1.0]\noffset = 1.0\n\
                [[methods]]\nname = \"dr\"\nkind = \"dr\"\na = \"A\"\nb = \"B\"\n";
    std::fs::write(dir.path().join("p.toml"), body).unwrap();
    let o = run_in(dir.path(), &["run", "p.toml"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("MaxIters"));
    std::fs::write(dir.path().join("p.toml"), format!("allow_max_iters = true\n{body}")).unwrap();
    assert!(run_in(dir.path(), &["run", "p.toml"]).status.success());
}

#[test]
fn verify_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["verify", config("verify_compose.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "PassedSampling");
    assert_eq!(report["samples"], 10000);
    let again = run_in(dir.path(), &["verify", config("verify_compose.toml").to_str().unwrap()]);
    assert_eq!(stdout(&o), stdout(&again));
}

#[test]
fn seed_override_changes_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("verify_compose.toml");
    let base = run_in(dir.path(), &["verify", cfg.to_str().unwrap()]);
    let other = bin()
        .current_dir(dir.path())
        .args(["verify", cfg.to_str().unwrap()])
        .env("FP_SEED", "8")
        .output()
        .unwrap();
    assert!(other.status.success());
    assert_ne!(stdout(&base), stdout(&other));
    let bad = bin()
        .current_dir(dir.path())
        .args(["verify", cfg.to_str().unwrap()])
        .env("FP_SEED", "x")
        .output()
        .unwrap();
    assert!(stderr(&bad).contains("FP_SEED"));
}

#[test]
fn counterexamples() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["counterexample", "sharpness"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(w["k"], 8);
    assert!(w["slack"].as_f64().unwrap() <= -0.05);

    let o = run_in(dir.path(), &["counterexample", "fix-collapse"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(w["max_deviation"].as_f64().unwrap() <= 1e-12);

    let o = run_in(dir.path(), &["counterexample", "not-relaxed-cutter"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(w["inner"].as_f64().unwrap() < 0.0);

    let o = run_in(dir.path(), &["counterexample", "fixv"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(w["sets_intersect"], false);
    assert!((w["last_residual"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
