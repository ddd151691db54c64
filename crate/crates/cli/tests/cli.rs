use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_compagency"))
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn pool_of_two_binary_agents() {
    let out = with_stdin(
        &["pool"],
        r#"{"agents":[{"p":[0.5,0.5]},{"p":[0.2,0.8]}],"beta":[0.5,0.5]}"#,
    );
    assert_eq!(out.status.code(), Some(0));
    let p = json(&out)["p"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect::<Vec<_>>();
    assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("3.3333333333333337e-1"), "{text}");
}

#[test]
fn linear_pool_by_kind() {
    let out = with_stdin(
        &["pool", "-"],
        r#"{"agents":[{"p":[0.5,0.5]},{"p":[0.2,0.8]}],"beta":[0.5,0.5],"kind":"linear"}"#,
    );
    assert_eq!(json(&out)["p"][0].as_f64().unwrap(), 0.35);
}

#[test]
fn gap_reports_all_terms() {
    let out = with_stdin(
        &["gap"],
        r#"{"agent":{"p":[0.2,0.8]},"pool":{"p":[0.5,0.5]}}"#,
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let (h_r, h_p, kl) = (
        0.5004024235381879,
        std::f64::consts::LN_2,
        0.22314355131420976,
    );
    assert!((v["entropy_agent"].as_f64().unwrap() - h_r).abs() < 1e-15);
    assert!((v["entropy_pool"].as_f64().unwrap() - h_p).abs() < 1e-15);
    assert!((v["kl_pool_agent"].as_f64().unwrap() - kl).abs() < 1e-15);
    assert!((v["gap"].as_f64().unwrap() - (h_r - h_p - kl)).abs() < 1e-15);
}

#[test]
fn factor_from_file_with_fixed_child() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("req.json");
    std::fs::write(
        &path,
        r#"{"parent":{"p":[0.2,0.3,0.5]},"beta":[0.3,0.4,0.3],"fixed":[{"p":[0.6,0.2,0.2]}],"seed":5}"#,
    )
    .unwrap();
    let out = bin().arg("factor").arg(&path).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["provenance"]["construction"], "with_fixed");
    assert_eq!(v["children"].as_array().unwrap().len(), 3);
    assert_eq!(v["kind"], "log");
}

#[test]
fn exit_codes() {
    assert_eq!(with_stdin(&["gap"], "{not json").status.code(), Some(2));
    assert_eq!(
        with_stdin(
            &["gap"],
            r#"{"agent":{"p":[0.5,0.6]},"pool":{"p":[0.5,0.5]}}"#
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        bin()
            .args(["verify", "nope"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bin().arg("frobnicate").output().unwrap().status.code(),
        Some(2)
    );
    assert_eq!(
        bin()
            .args(["pool", "/no/such/file"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    // A valid document that violates a domain precondition.
    let out = with_stdin(
        &["factor"],
        r#"{"parent":{"p":[0.2,0.3,0.5]},"beta":[1.0,0.0]}"#,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_suite_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = bin()
        .args([
            "verify",
            "welfare",
            "--seed",
            "7",
            "--samples",
            "20",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["all_passed"], true);
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"welfare.binary_census"));
}

#[test]
fn impossible_tolerance_fails_checks() {
    let out = bin()
        .args(["verify", "pools", "--samples", "5", "--tolerance", "1e-30"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let body = r#"{"schema":1,"family":"peaked_incompatible","grid":{"n":[2,3],"epsilon":[0.1,0.01]},
        "analyses":["gaps"],"seed":3}"#;
    std::fs::write(&cfg, body).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("experiment")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = csv::Reader::from_path(out_dir.join("results.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers
        .iter()
        .position(|h| h == "weighted_gap_sum")
        .unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[col].parse::<f64>().unwrap() < 0.0);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    use sha2::Digest;
    let hash = format!("{:x}", sha2::Sha256::digest(body.as_bytes()));
    assert_eq!(manifest["config_hash"], hash);
    assert_eq!(manifest["rows"], 4);

    std::fs::write(&cfg, r#"{"schema":1}"#).unwrap();
    let bad = bin()
        .arg("experiment")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
