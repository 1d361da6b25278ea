use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tdp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn tdp")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn phase_diagram_marks_the_gap_closing_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pd.json",
        r#"{"alpha_range":[0,0],"n_alpha":1,"beta_range":[-2.2,0],"n_beta":12,
            "grid":{"n_theta":24,"n_phi":48,"max_doublings":1}}"#,
    );
    let run = tdp(&["phase-diagram", "--config", &cfg], dir.path());
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("phase_diagram.json")).unwrap()).unwrap();
    let betas: Vec<f64> = serde_json::from_value(doc["betas"].clone()).unwrap();
    let charge = |b: f64| {
        let j = betas.iter().position(|x| (x - b).abs() < 1e-9).unwrap();
        (doc["charge"][j][0].clone(), doc["failure"][j][0].clone())
    };
    assert_eq!(charge(0.0).0, 2);
    assert_eq!(charge(-2.2).0, 0);
    let (c, f) = charge(-2.0);
    assert!(c.is_null());
    assert_eq!(f, "GapClosedOnSphere");
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"alpha":2.0,"radius":0.1}"#);
    let run = tdp(&["vortex", "--config", &cfg], dir.path());
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("radius"));
}

#[test]
fn malformed_arguments_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        tdp(&["flux-scan", "--ideal", "--dynamics"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(tdp(&["no-such-command"], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        tdp(
            &["vortex", "--config", missing.to_str().unwrap()],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn numerical_failure_exits_with_the_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pole.json", r#"{"alpha":1.0,"theta":0.0}"#);
    let run = tdp(&["vortex", "--config", &cfg], dir.path());
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("GapClosedOnLoop"));
}

#[test]
fn flux_scan_csv_carries_config_hash_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scan.json", r#"{"n_beta":5}"#);
    let run = tdp(&["flux-scan", "--ideal", "--config", &cfg], dir.path());
    assert!(run.status.success());
    let text = fs::read_to_string(dir.path().join("flux_scan.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let hash = header
        .strip_prefix("# tdp flux-scan config_sha256=")
        .unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(
        lines.next().unwrap(),
        "beta,gamma,gamma_F,gamma_T,wrapped,sigma,status"
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn dynamic_scan_is_reproducible_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(
        a.path(),
        "dyn.json",
        r#"{"beta_range":[-1.9,-1.0],"n_beta":2}"#,
    );
    for dir in [&a, &b] {
        let run = tdp(
            &["flux-scan", "--dynamics", "--seed", "11", "--config", &cfg],
            dir.path(),
        );
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    let first = fs::read(a.path().join("flux_scan.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("flux_scan.csv")).unwrap());

    let other = tempfile::tempdir().unwrap();
    tdp(
        &["flux-scan", "--dynamics", "--seed", "12", "--config", &cfg],
        other.path(),
    );
    assert_ne!(first, fs::read(other.path().join("flux_scan.csv")).unwrap());
}

#[test]
fn alpha_jump_shows_the_pole_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "jump.json",
        r#"{"alpha_range":[0.95,1.05],"n_alpha":2}"#,
    );
    assert!(tdp(&["alpha-jump", "--config", &cfg], dir.path())
        .status
        .success());
    let text = fs::read_to_string(dir.path().join("alpha_jump.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').take(4).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][3], rows[1][3]), (-1.0, 0.0));
    for r in &rows {
        assert!(r[1].abs() < 1e-12 && r[2].abs() < 1e-12);
    }
}

#[test]
fn loop_sim_writes_eight_ellipsoid_frames() {
    let dir = tempfile::tempdir().unwrap();
    let run = tdp(&["loop-sim", "--beta", "-2.2"], dir.path());
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let frames: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("ellipsoids.json")).unwrap()).unwrap();
    assert_eq!(frames["frames"].as_array().unwrap().len(), 8);
    let csv = fs::read_to_string(dir.path().join("loop_trajectory.csv")).unwrap();
    assert!(csv.starts_with("# tdp loop-sim config_sha256="));
}
