//! End-to-end command-line checks: exit codes per the documented
//! contract, JSON/CSV emission, determinism, and round-trip of the
//! spectral-set exchange format.

use std::path::PathBuf;
use std::process::Command;

fn specx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specx"))
}

fn write_temp(name: &str, content: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("specx-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

const TWO_BODY: &str = r#"
schema = "specx-config-v1"
[model]
kind = "two-body"
sites = [[0, -3.0]]
[oracle]
sizes = [256, 1024]
"#;

#[test]
fn ess_spec_reports_two_body_band() {
    let cfg = write_temp("two_body.toml", TWO_BODY);
    let out_path = cfg.with_file_name("two_body_report.json");
    let output = specx()
        .args(["ess-spec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["schema"], "specx-report-v1");
    assert_eq!(
        report["essential_spectrum"]["intervals"][0][0].as_f64(),
        Some(-2.0)
    );
    assert_eq!(
        report["essential_spectrum"]["intervals"][0][1].as_f64(),
        Some(2.0)
    );
    // both ray directions collapse onto one localization, flagged as two rows
    assert_eq!(report["directions"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_emits_csv_cloud() {
    let cfg = write_temp("two_body_csv.toml", TWO_BODY);
    let csv_path = cfg.with_file_name("cloud.csv");
    let output = specx()
        .args(["compare", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv_path)
        .arg("--csv")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("kind,value,value2\n"));
    assert!(csv.lines().any(|l| l.starts_with("eigenvalue,")));
    assert!(csv.lines().any(|l| l.starts_with("interval,")));
}

#[test]
fn compare_two_body_passes_tightly() {
    // the truncation cloud approaches the full two-body spectrum (band
    // plus bound state) well inside 1e-3 at the final size
    let tight = r#"
schema = "specx-config-v1"
[model]
kind = "two-body"
sites = [[0, -3.0]]
[tolerances]
compare_tol = 1e-3
[oracle]
sizes = [1000, 4000]
"#;
    let cfg = write_temp("tight.toml", tight);
    let out_path = cfg.with_file_name("tight_report.json");
    let output = specx()
        .args(["compare", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["reference_kind"], "full-spectrum");
    assert!(report["final_hausdorff"].as_f64().unwrap() < 1e-3);
}

#[test]
fn compare_json_is_deterministic_except_timestamp() {
    let cfg = write_temp("det.toml", TWO_BODY);
    let run = || -> String {
        let out_path = cfg.with_file_name("det_report.json");
        let output = specx()
            .args(["compare", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_path)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0));
        std::fs::read_to_string(&out_path).unwrap()
    };
    let strip = |s: &str| -> String {
        let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
        v.as_object_mut().unwrap().remove("generated_unix_ms");
        v.to_string()
    };
    let a = run();
    std::thread::sleep(std::time::Duration::from_millis(5));
    let b = run();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn exit_code_contract() {
    // 4: malformed config
    let bad = write_temp(
        "bad.toml",
        "schema = \"specx-config-v1\"\n[model]\nkind = \"nope\"\n",
    );
    let out = specx()
        .args(["ess-spec", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // 4: constraint violation
    let neg = write_temp(
        "neg.toml",
        "schema = \"specx-config-v1\"\n[model]\nkind = \"two-body\"\n[tolerances]\nlimit_tol = -1.0\n",
    );
    let out = specx()
        .args(["ess-spec", "--config"])
        .arg(&neg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // 4: usage error
    let out = specx().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    // 3: infeasible oracle size
    let cfg = write_temp("ok.toml", TWO_BODY);
    let out = specx()
        .args(["finite-section", "--config"])
        .arg(&cfg)
        .args(["--size", "2000000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // 0: happy path without output files
    let out = specx().args(["torus-lab", "--size", "8"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn torus_and_landstad_reports() {
    let dir = std::env::temp_dir().join(format!("specx-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("torus.json");
    let out = specx()
        .args(["torus-lab", "--size", "16", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report["inversion_error"].as_f64().unwrap() < 1e-10);

    let out_path = dir.join("landstad.json");
    let out = specx()
        .args(["landstad-check", "--size", "32", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report["rank_one_defect"]["defect"].as_f64().unwrap() < 0.3);
    assert_eq!(report["shift_defect"]["position_tail"].as_f64(), Some(1.0));
    let profile = report["commutator_profile"].as_array().unwrap();
    assert_eq!(profile.len(), 32);
    assert!(profile[0].as_f64().unwrap() < 1e-9);
}

#[test]
fn spectral_set_exchange_round_trip() {
    // the canonical exchange format survives a write/read cycle exactly
    let cfg = write_temp("rt.toml", TWO_BODY);
    let out_path = cfg.with_file_name("rt_report.json");
    let output = specx()
        .args(["ess-spec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let set: specx::SpectralSet =
        serde_json::from_value(report["essential_spectrum"].clone()).unwrap();
    assert_eq!(set, specx::SpectralSet::interval(-2.0, 2.0));
}

#[test]
fn sparse_config_end_to_end() {
    let sparse = r#"
schema = "specx-config-v1"
[model]
kind = "sparse-klaus"
schedule = "squares"
assignment_cycle = [0, 1]
[[model.bumps]]
offsets = [0]
values = [-3.0]
[[model.bumps]]
offsets = [0]
values = [5.0]
[oracle]
sizes = [2048]
"#;
    let cfg = write_temp("sparse.toml", sparse);
    let out_path = cfg.with_file_name("sparse_report.json");
    let output = specx()
        .args(["ess-spec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let pts = report["essential_spectrum"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 2);
    assert!((pts[0].as_f64().unwrap() + 13.0f64.sqrt()).abs() < 1e-6);
    assert!((pts[1].as_f64().unwrap() - 29.0f64.sqrt()).abs() < 1e-6);
    // the klaus formula cross-check is embedded in the report
    assert_eq!(report["klaus_formula"], report["essential_spectrum"]);
}

#[test]
fn warped_config_end_to_end() {
    let warped = r#"
schema = "specx-config-v1"
[model]
kind = "warped-periodic"
table = [0.0, 3.0]
warp = "sqrtshift"
"#;
    let cfg = write_temp("warped.toml", warped);
    let out_path = cfg.with_file_name("warped_report.json");
    let output = specx()
        .args(["ess-spec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let iv = report["essential_spectrum"]["intervals"]
        .as_array()
        .unwrap();
    assert_eq!(iv.len(), 2);
    assert!((iv[0][0].as_f64().unwrap() + 1.0).abs() < 1e-8);
    assert!((iv[0][1].as_f64().unwrap()).abs() < 1e-8);
    assert!((iv[1][0].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!((iv[1][1].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert!(report["warp_invariance_distance"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn hvz_config_end_to_end() {
    let hvz = r#"
schema = "specx-config-v1"
[model]
kind = "hvz"
weights = [1.0, 1.0]
potential_x0 = [[0, -3.0]]
potential_x1 = [[0, -3.0]]
"#;
    let cfg = write_temp("hvz.toml", hvz);
    let out_path = cfg.with_file_name("hvz_report.json");
    // small box keeps this test quick; the acceptance suite runs 60x60
    let output = specx()
        .args(["hvz", "--config"])
        .arg(&cfg)
        .args(["--size", "24"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let lo = report["essential_spectrum"]["intervals"][0][0]
        .as_f64()
        .unwrap();
    assert!((lo + 13.0f64.sqrt() + 2.0).abs() < 1e-6);
    // the full separable reference contains the two-cluster bound state
    let full_pts = report["full_separable_spectrum"]["points"]
        .as_array()
        .unwrap();
    assert!(full_pts
        .iter()
        .any(|p| (p.as_f64().unwrap() + 2.0 * 13.0f64.sqrt()).abs() < 1e-6));
}
