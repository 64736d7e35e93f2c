use std::path::{Path, PathBuf};
use std::process::Command;

use raylength::report::read_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_raylength"))
}

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn run_ok(args: &[&str], out: &Path) {
    let status = bin().args(args).arg("--out").arg(out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

/// The file without its `#` comment lines.
fn body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn unknown_command_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failures_produce_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["spectrum", "--scene"])
        .arg(scene("unit_sphere.scene"))
        .args(["--omega", "0,0,1", "--theta", "0,0,1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["error"], "computation");
    let missing = bin().args(["spectrum", "--scene", "/nonexistent.scene"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(report["error"], "io");
    let bad = dir.path().join("bad.scene");
    std::fs::write(&bad, "rho = 3\na = four\n").unwrap();
    let parse = bin().args(["spectrum", "--scene"]).arg(&bad).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&parse.stderr).unwrap();
    assert_eq!((report["line"].as_u64(), report["column"].as_u64()), (Some(2), Some(5)));
}

#[test]
fn single_sphere_spectrum_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["spectrum", "--scene", scene("unit_sphere.scene").to_str().unwrap(), "--omega", "0.3,-0.4,-1", "--theta", "-0.2,0.9,0.1"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(header, ["ray_id", "m", "t_singular", "det_dJ", "coeff_magnitude", "separated"]);
    assert_eq!(rows.len(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 0);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn validate_sphere_reports_peak_time_errors() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["validate-sphere", "--scene", scene("unit_sphere.scene").to_str().unwrap()], dir.path());
    let (header, rows) = read_csv(&dir.path().join("validate_sphere.csv")).unwrap();
    let col = header.iter().position(|h| h == "peak_time_error").unwrap();
    let res = header.iter().position(|h| h == "resolution").unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[col].parse::<f64>().unwrap() < r[res].parse::<f64>().unwrap());
    }
}

#[test]
fn runs_are_reproducible() {
    let two = scene("two_spheres.scene");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["spectrum", "--omega", "0,-1,0", "--theta", "0.3,0.2,1", "--m-max", "5"], "spectrum.csv"),
        (vec!["cross-check", "--omega", "0,-1,0", "--theta", "0.3,0.2,1"], "cross_check.csv"),
        (vec!["weakndg", "--samples", "2000", "--seed", "42"], "weakndg.csv"),
        (vec!["trapscan", "--grid", "20", "--budget", "100", "--stages", "3"], "sequence.csv"),
        (vec!["trapscan", "--grid", "20", "--budget", "100", "--stages", "3"], "escape_field.csv"),
    ];
    for (args, file) in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--scene", two.to_str().unwrap()]);
            run_ok(&full, d.path());
        }
        let (x, y) = (std::fs::read(a.path().join(file)).unwrap(), std::fs::read(b.path().join(file)).unwrap());
        assert_eq!(x, y, "{file}");
        assert!(!body(&a.path().join(file)).is_empty());
    }
}
