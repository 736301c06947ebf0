use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn gridlyap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridlyap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_relaxation_matches_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = gridlyap(&[
        "simulate",
        path_str(&scenario("relaxation")),
        "--initial",
        "unit",
        "-o",
        path_str(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,delta_MG1"));
    let mut rows = 0;
    for line in lines {
        let (t, x) = line.split_once(',').unwrap();
        let (t, x): (f64, f64) = (t.parse().unwrap(), x.parse().unwrap());
        assert!((x - (-t).exp()).abs() < 1e-9, "t = {t}: {x}");
        rows += 1;
    }
    assert_eq!(rows, 201);
}

#[test]
fn malformed_scenario_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\n[system]\nmicrogrids = 3\n").unwrap();
    let out = gridlyap(&[
        "check-stability",
        path_str(&bad),
        "-o",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn operating_point_past_the_stability_limit_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("case_a")).unwrap();
    // Reduced angle droop against a stiff, almost lossless tie at 2.5 rad:
    // the synchronizing power gradient turns negative.
    let text = text
        .replace(
            "interface = { kind = \"angle_droop_full\", m_a = 0.5, d_a = 0.6, m_v = 4.0, d_v = 2.0 }",
            "interface = { kind = \"angle_droop_reduced\", m_a = 0.5, d_a = 1.0 }",
        )
        .replace("delta = 0.1", "delta = 2.5")
        .replace("r = 0.4", "r = 0.001")
        .replace("x = 0.3", "x = 0.1")
        .replace("x0 = [-0.5, 1.0]", "x0 = [0.1]");
    let path = dir.path().join("unstable.toml");
    std::fs::write(&path, text).unwrap();
    let out = gridlyap(&[
        "check-stability",
        path_str(&path),
        "-o",
        path_str(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("eigenvalues"));
    let out = gridlyap(&["run", path_str(&path), "-o", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eigenvalues"));
}

#[test]
fn case_a_learn_estimate_compare_validate() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    let sc = scenario("case_a");
    let out = gridlyap(&["--deterministic", "learn", path_str(&sc), "-o", d]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cert = dir.path().join("certificate.json");
    let original = std::fs::read_to_string(&cert).unwrap();
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("learn_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["hyper"]["u"], 1.5);
    assert_eq!(report["scenario_hash"].as_str().unwrap().len(), 64);

    let out = gridlyap(&[
        "estimate-region",
        path_str(&sc),
        "-c",
        path_str(&cert),
        "-o",
        d,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let region: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("region_report.json")).unwrap(),
    )
    .unwrap();
    assert!(region["d_star"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("levelset_origin_0_1.csv").exists());

    // Reading the certificate must not alter a single bit of θ.
    let again = gridlyap::report::CertificateFile::load(&cert).unwrap();
    assert_eq!(
        serde_json::to_string_pretty(&again).unwrap(),
        original.trim_end()
    );

    let out = gridlyap(&["compare", path_str(&sc), "-c", path_str(&cert), "-o", d]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("compare_report.json")).unwrap(),
    )
    .unwrap();
    assert!(cmp["ratio"].as_f64().unwrap() > 1.0);

    let out = gridlyap(&[
        "validate-region",
        path_str(&sc),
        "-c",
        path_str(&cert),
        "--trajectories",
        "20",
        "--mc-samples",
        "2000",
        "-o",
        d,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc = scenario("case_a");
    for dir in [&a, &b] {
        let out = gridlyap(&[
            "--deterministic",
            "run",
            path_str(&sc),
            "-o",
            path_str(dir.path()),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["certificate.json", "region_report.json"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file} differs"
        );
    }
}
