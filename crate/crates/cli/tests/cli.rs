use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use szego_cli::freeze::FixtureFile;
use szego_cli::ReportEntry;

fn szego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szego"))
        .args(args)
        .env_remove("SZEGO_POLICY")
        .output()
        .expect("run szego")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn complex(v: &Value) -> (f64, f64) {
    (v["re"].as_f64().unwrap(), v["im"].as_f64().unwrap())
}

const SMALL_TORUS: &str = r#"{
  "curve": {"kind": "torus", "tau": {"re": 0.0, "im": 1.0}},
  "suites": [
    {"name": "composition", "instances": 8},
    {"name": "determinant", "instances": 5},
    {"name": "expansion-2delta", "instances": 4}
  ],
  "policy": {"seed": 42}
}"#;

#[test]
fn eval_theta_at_origin() {
    let out = szego(&["eval", "theta", "--tau", "0,1", "--z", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let (re, im) = complex(&json_stdout(&out));
    assert!((re - 1.086_434_811_213_308).abs() < 1e-15);
    assert_eq!(im, 0.0);
}

#[test]
fn eval_theta_genus_two_with_characteristic() {
    let out = szego(&[
        "eval", "theta", "--tau", "0,1;0.5,0;0.5,0;0,2", "--z", "0.1,0.2;-0.3,0.05", "--a", "0.5,0", "--b", "0,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (re, im) = complex(&json_stdout(&out));
    assert!((re - 1.049_791_413_336_422).abs() < 1e-13);
    assert!((im + 0.194_399_259_678_098_98).abs() < 1e-13);
}

#[test]
fn eval_sphere_szego_and_diagonal_prime_form() {
    let out = szego(&["eval", "szego", "--curve", "sphere", "--x", "0,0", "--y", "1,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(complex(&json_stdout(&out)), (1.0, 0.0));

    let out = szego(&["eval", "prime-form", "--curve", "torus", "--tau", "0,1", "--x", "0.2,0", "--y", "0.2,0"]);
    assert_eq!(out.status.code(), Some(0));
    let (re, im) = complex(&json_stdout(&out));
    assert!(re.abs() < 1e-15 && im.abs() < 1e-15);
}

#[test]
fn eval_expansion_matches_contour_fixture() {
    let out = szego(&["eval", "expansion", "--tau", "0,1", "--z", "0.37,0.21", "--x", "0.1,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let (re, im) = complex(&v["c0"]);
    assert!((re + 0.975_407_387_907_480_2).abs() < 1e-9 && (im - 0.611_602_550_782_950_4).abs() < 1e-9);
    let (re, im) = complex(&v["c_minus1"]);
    assert!((re - 1.0).abs() < 1e-10 && im.abs() < 1e-10);
}

#[test]
fn eval_negative_coordinates_parse() {
    let out = szego(&["eval", "szego", "--curve", "sphere", "--x", "-1,-0.5", "--y", "1,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let (re, im) = complex(&json_stdout(&out));
    // 1 / (2 + i)
    assert!((re - 0.4).abs() < 1e-15 && (im + 0.2).abs() < 1e-15);
}

#[test]
fn eval_error_paths() {
    // Evaluation error: bundle on the theta divisor.
    let out = szego(&["eval", "szego", "--tau", "0,1", "--z", "0.5,0.5", "--x", "0.1,0", "--y", "0.3,0"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "OnThetaDivisor");

    // Evaluation error: diagonal pole.
    let out = szego(&["eval", "szego", "--tau", "0,1", "--z", "0.1,0", "--x", "0.2,0", "--y", "0.2,0"]);
    assert_eq!(out.status.code(), Some(3));

    // Spec errors.
    for args in [
        vec!["eval", "theta", "--tau", "0,-1", "--z", "0,0"],
        vec!["eval", "theta", "--tau", "0,1", "--z", "a,0"],
        vec!["eval", "theta", "--tau", "0,1"],
        vec!["eval", "theta", "--tau", "0,1", "--z", "0,0", "--a", "0.3"],
        vec!["eval", "theta", "--tau", "0,1", "--z", "0,0", "--dz", "4"],
        vec!["eval", "szego", "--curve", "sphere", "--z", "0.2,0", "--x", "0,0", "--y", "1,0"],
        vec!["eval", "prime-form", "--curve", "torus", "--x", "0,0", "--y", "1,0"],
        vec!["eval", "bogus"],
    ] {
        let out = szego(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", SMALL_TORUS);
    let report = dir.path().join("report.json");
    let out = szego(&["verify", ok.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<ReportEntry> = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(entries.iter().all(|e| e.passed && e.policy.seed == 42));

    let on_divisor = write(
        dir.path(),
        "divisor.json",
        r#"{"curve": {"kind": "torus", "tau": {"re": 0, "im": 1}},
            "bundle": {"z": [{"re": 0.5, "im": 0.5}]},
            "suites": [{"name": "composition", "instances": 3}]}"#,
    );
    let out = szego(&["verify", on_divisor.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let entries: Vec<ReportEntry> = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(!entries[0].passed);
    assert!(entries[0].records.iter().all(|r| r.error.as_deref().unwrap().contains("theta divisor")));

    for (name, body) in [
        ("unknown.json", r#"{"curve": {"kind": "torus", "tau": {"re": 0, "im": 1}}, "suites": [{"name": "nope"}]}"#),
        ("badtau.json", r#"{"curve": {"kind": "torus", "tau": {"re": 0, "im": -1}}}"#),
        ("notau.json", r#"{"curve": {"kind": "torus"}}"#),
        ("sphere2d.json", r#"{"curve": {"kind": "sphere"}, "suites": [{"name": "expansion-2delta"}]}"#),
        ("sphere_bundle.json", r#"{"curve": {"kind": "sphere"}, "bundle": {"z": [{"re": 0.1, "im": 0}]}}"#),
        ("samples.json", r#"{"curve": {"kind": "sphere"}, "policy": {"contour_samples": 4}}"#),
        ("extra.json", r#"{"curve": {"kind": "sphere"}, "colour": 1}"#),
        ("broken.json", r#"{"curve": "#),
    ] {
        let p = write(dir.path(), name, body);
        let out = szego(&["verify", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "InvalidInput");
    }
    let out = szego(&["verify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_sphere_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "sphere.json",
        r#"{"curve": {"kind": "sphere"}, "suites": [{"name": "composition", "instances": 20}, {"name": "degenerate", "instances": 20}]}"#,
    );
    let out = szego(&["verify", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let entries: Vec<ReportEntry> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(entries[0].identity_name, "composition/rank1");
    assert_eq!(entries[0].tolerance, 1e-13);
}

#[test]
fn policy_layers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"curve": {"kind": "sphere"}, "suites": [{"name": "determinant", "instances": 2}]}"#,
    );
    let policy = write(dir.path(), "policy.json", r#"{"seed": 7, "ring_radius": 0.005}"#);
    let run = |extra: &[&str]| {
        let mut args = vec!["verify", spec.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_szego")).args(&args).env("SZEGO_POLICY", &policy).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        serde_json::from_slice::<Vec<ReportEntry>>(&out.stdout).unwrap()
    };
    let from_env = run(&[]);
    assert_eq!(from_env[0].policy.seed, 7);
    assert_eq!(from_env[0].policy.ring_radius, 0.005);
    let overridden = run(&["--seed", "9"]);
    assert_eq!(overridden[0].policy.seed, 9);
    assert_eq!(overridden[0].policy.ring_radius, 0.005);

    let bad = write(dir.path(), "bad.json", r#"{"contour_samples": 2}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_szego"))
        .args(["verify", spec.to_str().unwrap()])
        .env("SZEGO_POLICY", &bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", SMALL_TORUS);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = szego(&["verify", spec.to_str().unwrap(), "--output", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());

    let entries: Vec<ReportEntry> = serde_json::from_slice(&text).unwrap();
    let again: Vec<ReportEntry> = serde_json::from_str(&serde_json::to_string(&entries).unwrap()).unwrap();
    assert_eq!(entries, again);

    let other = dir.path().join("c.json");
    let out = szego(&["verify", spec.to_str().unwrap(), "--seed", "43", "--output", other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(text, std::fs::read(&other).unwrap());
}

#[test]
fn freeze_and_refreeze() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"curve": {"kind": "torus", "tau": {"re": 0, "im": 1}},
            "fixture_taus": [{"re": 0.5, "im": 1.0}],
            "policy": {"seed": 5}}"#,
    );
    let freeze = |mult: &str, name: &str| -> FixtureFile {
        let path = dir.path().join(name);
        let out = szego(&[
            "freeze-fixtures",
            spec.to_str().unwrap(),
            "--oracle-radius",
            mult,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    };
    let base = freeze("10", "f10.json");
    let doubled = freeze("20", "f20.json");
    assert_eq!(base.provenance.seed, 5);
    assert_eq!(base.provenance.radius_multiplier, 10);
    assert_eq!(base.entries.len(), 10);
    for (e, d) in base.entries.iter().zip(&doubled.entries) {
        assert_eq!(e.name, d.name);
        assert!(d.oracle_radius > e.oracle_radius);
        let diff = ((e.value.re - d.value.re).powi(2) + (e.value.im - d.value.im).powi(2)).sqrt();
        assert!(diff <= 1e-14 * (1.0 + e.value.re.hypot(e.value.im)), "{}: {diff:e}", e.name);
    }

    // Against 40-digit values.
    let expected = [
        ("theta(0)", 1.086_434_811_213_308),
        ("theta1'(0)", 2.848_694_603_987_787_3),
        ("p_rel(0.3)", 15.125_506_969_435_32),
        ("p_rel'(0.3)", -67.958_883_919_099_6),
        ("extended-connection-offset", std::f64::consts::FRAC_PI_2),
    ];
    for (name, value) in expected {
        let e = base.entries.iter().find(|e| e.name == name && e.tau.im == 1.0 && e.tau.re == 0.0).unwrap();
        assert!((e.value.re - value).abs() <= 1e-13 * value.abs(), "{name}: {}", e.value.re);
        assert!(e.value.im.abs() < 1e-13, "{name}");
    }
    let e = base.entries.iter().find(|e| e.name == "extended-connection-offset" && e.tau.re == 0.5).unwrap();
    assert!((e.value.re - 1.718_245_751_632_643_2).abs() < 1e-13);

    let sphere = write(dir.path(), "sphere.json", r#"{"curve": {"kind": "sphere"}}"#);
    let out = szego(&["freeze-fixtures", sphere.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
