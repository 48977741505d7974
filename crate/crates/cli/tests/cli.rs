use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use natcon_cli::TensorFile;
use serde_json::Value;
use tempfile::TempDir;

fn natcon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_natcon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        code(out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn fixture(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut all = vec!["fixture"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let out = natcon(&all);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn identity_file() -> TensorFile {
    let text = r#"{"dim": 4,
        "g": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],
        "P": [[1,0,0,0],[0,1,0,0],[0,0,-1,0],[0,0,0,-1]]}"#;
    TensorFile::parse(text).unwrap()
}

#[test]
fn classify_reports_w1_fixture() {
    let dir = TempDir::new().unwrap();
    let f = fixture(
        &dir,
        "w1.json",
        &["--kind", "w1", "--theta", "0.3,-1,2,0.5"],
    );
    let v = json(&natcon(&["classify", s(&f)]));
    assert_eq!(v["command"], "classify");
    assert_eq!(v["result"]["verdict"], "W1");
}

#[test]
fn classify_reports_each_fixture_class() {
    let dir = TempDir::new().unwrap();
    for (kind, verdict) in [
        ("w2", "W2"),
        ("w1-plus-w2", "W1⊕W2"),
        ("generic", "outside W1⊕W2"),
    ] {
        let f = fixture(
            &dir,
            "f.json",
            &["--kind", kind, "--random-geometry", "--seed", "7"],
        );
        let v = json(&natcon(&["classify", s(&f)]));
        assert_eq!(v["result"]["verdict"], verdict, "{kind}");
    }
}

#[test]
fn classify_zero_structure_tensor_is_w0() {
    let dir = TempDir::new().unwrap();
    let mut file = identity_file();
    file.f = Some(vec![0.0; 64]);
    let path = write(&dir, "zero.json", &file.to_json());
    let v = json(&natcon(&["classify", s(&path)]));
    assert_eq!(v["result"]["verdict"], "W0");
}

#[test]
fn decompose_canonical_torsion_is_case_a() {
    let dir = TempDir::new().unwrap();
    let f = fixture(&dir, "can.json", &["--kind", "canonical"]);
    let v = json(&natcon(&["decompose", s(&f)]));
    assert_eq!(v["result"]["case"], "A");
    assert_eq!(
        v["result"]["nonzero"],
        serde_json::json!([true, false, false, false])
    );
    let p1 = v["result"]["norms"][0].as_f64().unwrap();
    assert!((p1 - 0.5).abs() < 1e-12, "{p1}");
}

#[test]
fn decompose_zero_torsion_is_other() {
    let dir = TempDir::new().unwrap();
    let mut file = identity_file();
    file.t = Some(vec![0.0; 64]);
    let path = write(&dir, "zero.json", &file.to_json());
    let v = json(&natcon(&["decompose", s(&path)]));
    assert_eq!(v["result"]["case"], "other");
    assert_eq!(v["result"]["total_norm"], 0.0);
}

#[test]
fn canonical_family_member_matches_canonical_fixture() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("family.json");
    let v = json(&natcon(&[
        "family",
        "--n",
        "2",
        "--theta",
        "1,0,0,0",
        "--lambda",
        "0",
        "--mu",
        "-0.125",
        "--out",
        s(&out),
    ]));
    assert_eq!(v["result"]["is_canonical"], true);
    assert_eq!(
        v["result"]["canonical_params"],
        serde_json::json!([0.0, -0.125])
    );
    assert_eq!(v["result"]["decomposition"]["case"], "A");
    assert_eq!(v["result"]["naturality"]["natural"], true);

    let canonical = fixture(
        &dir,
        "can.json",
        &["--kind", "canonical", "--theta", "1,0,0,0"],
    );
    let (family, _) = TensorFile::read(&out).unwrap();
    let (expected, _) = TensorFile::read(&canonical).unwrap();
    assert_eq!(
        family.normalized(12).to_json(),
        expected.normalized(12).to_json()
    );
}

#[test]
fn non_canonical_family_member_is_case_b() {
    let v = json(&natcon(&[
        "family", "--n", "2", "--theta", "1,0,0,0", "--lambda", "1", "--mu", "0",
    ]));
    let r = &v["result"];
    assert_eq!(r["is_canonical"], false);
    assert_eq!(r["decomposition"]["case"], "B");
    assert_eq!(
        r["decomposition"]["nonzero"],
        serde_json::json!([true, false, false, true])
    );
    assert_eq!(r["naturality"]["natural"], true);
    assert!(r["case_b_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn family_with_zero_theta_has_zero_torsion() {
    let v = json(&natcon(&[
        "family", "--n", "2", "--theta", "0,0,0,0", "--lambda", "2", "--mu", "-1",
    ]));
    let t = v["result"]["tensor_file"]["T"].as_array().unwrap();
    assert_eq!(t.len(), 64);
    assert!(t.iter().all(|x| x.as_f64().unwrap() == 0.0));
    assert_eq!(v["result"]["decomposition"]["case"], "other");
}

#[test]
fn family_accepts_geometry_from_file() {
    let dir = TempDir::new().unwrap();
    let geo = fixture(
        &dir,
        "geo.json",
        &["--kind", "w1", "--random-geometry", "--seed", "3"],
    );
    let v = json(&natcon(&[
        "family",
        "--n",
        "2",
        "--theta",
        "0.2,0.1,-0.4,1",
        "--lambda",
        "-0.5",
        "--mu",
        "0.7",
        "--g",
        s(&geo),
    ]));
    assert_eq!(v["result"]["decomposition"]["case"], "B");
    assert_eq!(v["result"]["naturality"]["natural"], true);
}

#[test]
fn verify_passes_at_dimension_four() {
    let v = json(&natcon(&[
        "verify", "--dims", "4", "--trials", "10", "--seed", "1",
    ]));
    assert_eq!(v["result"]["passed"], true);
    let props = v["result"]["properties"].as_array().unwrap();
    assert!(props.len() >= 10);
    assert!(props.iter().all(|p| p["passed"] == true && p["dim"] == 4));
}

#[test]
fn verify_at_dimension_two_passes_with_notes() {
    let v = json(&natcon(&["verify", "--dims", "2", "--trials", "10"]));
    assert_eq!(v["result"]["passed"], true);
    assert!(!v["result"]["notes"].as_array().unwrap().is_empty());
}

#[test]
fn verify_with_impossible_tolerance_exits_one() {
    let out = natcon(&["verify", "--dims", "4", "--trials", "3", "--tol", "1e-30"]);
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["passed"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("failing properties"));
}

#[test]
fn chart_verdicts() {
    for (chart, verdict) in [
        ("flat_product", "W0"),
        ("conformal_product", "W1"),
        ("rotated_p", "outside W1⊕W2"),
    ] {
        let v = json(&natcon(&[
            "chart",
            "--chart",
            chart,
            "--point",
            "0.1,-0.2,0.3,0.05",
        ]));
        assert_eq!(v["result"]["class_report"]["verdict"], verdict, "{chart}");
    }
}

#[test]
fn conformal_chart_canonical_connection_is_natural() {
    let v = json(&natcon(&[
        "chart",
        "--chart",
        "conformal_product",
        "--point",
        "0.4,0,0,0",
    ]));
    let r = &v["result"];
    assert!(r["canonical_fd_check"]["metric_residual"].as_f64().unwrap() < 1e-6);
    assert!(
        r["canonical_fd_check"]["product_residual"]
            .as_f64()
            .unwrap()
            < 1e-6
    );
    assert!(r["phi_discrepancy"].as_f64().unwrap() < 1e-6);
}

#[test]
fn rotated_chart_in_dimension_two_is_w1() {
    let v = json(&natcon(&[
        "chart",
        "--chart",
        "rotated_p",
        "--point",
        "0.3,0.2",
    ]));
    assert_eq!(v["result"]["class_report"]["verdict"], "W1");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let f = fixture(
        &dir,
        "g.json",
        &["--kind", "w1-plus-w2", "--random-geometry", "--seed", "11"],
    );
    let runs: [&[&str]; 4] = [
        &["classify", s(&f)],
        &[
            "family",
            "--n",
            "3",
            "--theta",
            "1,2,3,4,5,6",
            "--lambda",
            "0.3",
            "--mu",
            "0.1",
        ],
        &[
            "chart",
            "--chart",
            "conformal_product",
            "--point",
            "0.1,0.2,0.3,0.4",
        ],
        &["verify", "--dims", "4", "--trials", "3", "--seed", "5"],
    ];
    for args in runs {
        let a = natcon(args);
        let b = natcon(args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn input_digest_tracks_file_contents() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "a.json", &["--kind", "w1"]);
    let b = fixture(&dir, "b.json", &["--kind", "w1", "--theta", "0,1,0,0"]);
    let da = json(&natcon(&["classify", s(&a)]))["input_sha256"].clone();
    let db = json(&natcon(&["classify", s(&b)]))["input_sha256"].clone();
    assert_eq!(da.as_str().unwrap().len(), 64);
    assert_ne!(da, db);
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let malformed = write(&dir, "bad.json", "{\"dim\": 4, \"g\": [[1]]");
    let wrong_shape = write(
        &dir,
        "shape.json",
        "{\"dim\": 4, \"g\": [[1]], \"P\": [[1]]}",
    );
    let unknown = write(
        &dir,
        "extra.json",
        &identity_file()
            .to_json()
            .replace("\"dim\"", "\"oops\": 1, \"dim\""),
    );
    let cases: [&[&str]; 9] = [
        &["classify", s(&malformed)],
        &["classify", s(&wrong_shape)],
        &["classify", s(&unknown)],
        &["classify", "/nonexistent/file.json"],
        &["chart", "--chart", "nope"],
        &["verify", "--dims", "3"],
        &[
            "family", "--n", "2", "--theta", "1,0", "--lambda", "0", "--mu", "0",
        ],
        &["decompose"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = natcon(args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn missing_tensor_field_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "noF.json", &identity_file().to_json());
    assert_eq!(code(&natcon(&["classify", s(&path)])), 2);
    assert_eq!(code(&natcon(&["decompose", s(&path)])), 2);
}

#[test]
fn invariant_violations_exit_three() {
    let dir = TempDir::new().unwrap();

    let mut asym_g = identity_file();
    asym_g.g[0][1] = 0.4;
    asym_g.f = Some(vec![0.0; 64]);
    let asym_g = write(&dir, "g.json", &asym_g.to_json());

    let mut not_product = identity_file();
    not_product.p[0][1] = 0.5;
    not_product.f = Some(vec![0.0; 64]);
    let not_product = write(&dir, "p.json", &not_product.to_json());

    let mut sym_t = identity_file();
    sym_t.t = Some(vec![1.0; 64]);
    let sym_t = write(&dir, "t.json", &sym_t.to_json());

    for args in [
        ["classify", s(&asym_g)],
        ["classify", s(&not_product)],
        ["decompose", s(&sym_t)],
    ] {
        let out = natcon(&args);
        assert_eq!(
            code(&out),
            3,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn help_exits_zero() {
    let out = natcon(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("classify"));
}
