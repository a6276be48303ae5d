use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aim-lake"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("AIM_LAKE_WORKERS")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    scenarios().join(format!("{name}.toml")).display().to_string()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn basis_on_constant_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["basis", "--scenario", &scenario("constant")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let first: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 2.0).abs() < 1e-12);
    let m = manifest(dir.path());
    assert_eq!(m["pass"], true);
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert!(std::fs::read_dir(dir.path().join("basis-cache")).unwrap().count() > 0);
    assert!(std::fs::read_to_string(dir.path().join("eigenvalues.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn missing_table_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\n[grid]\nside_length = 6.283185307179586\npoints = 16\nmodes = 3\n\
         [fields]\nb = { table = \"nowhere.csv\" }\nnu = 1.0\n[integrator]\ndt = 0.01\nhorizon = 1.0\n",
    )
    .unwrap();
    let o = run(&["basis", "--scenario", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fields.b"));
}

#[test]
fn malformed_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[grid\n").unwrap();
    let o = run(&["all", "--scenario", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn all_on_unforced_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = run(&["all", "--scenario", &scenario("unforced"), "--workers", "2"], a.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["all", "--scenario", &scenario("unforced")], b.path());
    assert_eq!(o.status.code(), Some(0));

    let report = std::fs::read_to_string(a.path().join("report.md")).unwrap();
    assert!(report.contains("| ✓ | energy monotone |"));
    assert!(report.contains("| ✓ | log-law envelope violations | 0 |"));
    assert!(report.contains("log_law_C = "));

    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma["workers"], 2);
    let sums = |m: &serde_json::Value| -> Vec<(String, String)> {
        let mut v: Vec<_> = m["files"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["path"] != "report.md")
            .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(sums(&ma), sums(&mb));
    assert!(sums(&ma).iter().any(|(p, _)| p == "split_L1.csv"));
}

#[test]
fn seed_override_changes_the_trajectory() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["simulate", "--scenario", &scenario("constant")], a.path());
    run(&["simulate", "--scenario", &scenario("constant"), "--seed", "99"], b.path());
    let ta = std::fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    let tb = std::fs::read_to_string(b.path().join("trajectory.csv")).unwrap();
    assert_ne!(ta, tb);
    assert_eq!(manifest(b.path())["seed"], 99);
}

#[test]
fn delta2_violation_is_flagged_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--scenario", &scenario("violation")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let before = std::fs::read(dir.path().join("absorbing.json")).unwrap();

    let o = run(&["aim", "--scenario", &scenario("violation")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // The aim stage reuses the estimates written by simulate.
    assert_eq!(std::fs::read(dir.path().join("absorbing.json")).unwrap(), before);
    let report = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(report.contains("| flagged | lambda_n >= delta2 |"), "{report}");
    assert!(report.contains("delta2 = 1000.0000"));
    let csv = std::fs::read_to_string(dir.path().join("semidistance.csv")).unwrap();
    assert!(csv.starts_with("n,lambda_n1,level,rho_N,rho_flat,paper_target"));
}
