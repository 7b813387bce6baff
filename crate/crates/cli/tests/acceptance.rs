//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use szego_cli::freeze::fixtures_for;
use szego_cli::spec::{CurveKind, CurveSpec, PolicySpec, RunSpec, SuiteSpec};
use szego_cli::{verify, ReportEntry};
use szego_core::algebra::TruncationPolicy;
use szego_core::curves::{BundlePoint, CurveModel, DecomposableBundle, PointOnCurve, TestFunction};
use szego_core::identities::{
    calibrate_composition_sign, verify_composition_identity, verify_degenerate_identity, COMPOSITION_SIGN,
    FROZEN_OFFSETS,
};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn torus_spec(tau: Complex64, suites: &[(&str, Option<f64>, Option<usize>)]) -> RunSpec {
    RunSpec {
        curve: CurveSpec { kind: CurveKind::Torus, tau: Some(tau.into()) },
        bundle: None,
        suites: suites
            .iter()
            .map(|&(name, tolerance, instances)| SuiteSpec { name: name.into(), tolerance, instances })
            .collect(),
        policy: PolicySpec { seed: Some(2024), ..PolicySpec::default() },
        output: None,
        fixture_taus: Vec::new(),
    }
}

fn run(spec: &RunSpec) -> Result<Vec<ReportEntry>, String> {
    verify(spec, PolicySpec::default()).map_err(|e| e.to_string())
}

fn entry<'a>(entries: &'a [ReportEntry], name: &str) -> Result<&'a ReportEntry, String> {
    entries.iter().find(|e| e.identity_name == name).ok_or_else(|| format!("missing report {name}"))
}

/// Requires `passed`, at least `min_instances` instances, and optionally an
/// absolute error bound.
fn check(e: &ReportEntry, min_instances: usize, abs_bound: Option<f64>) -> Outcome {
    if e.instances < min_instances {
        return Err(format!("{}: only {} instances", e.identity_name, e.instances));
    }
    if !e.passed {
        return Err(format!(
            "{}: max rel error {:e} > {:e}",
            e.identity_name, e.max_rel_error, e.tolerance
        ));
    }
    if let Some(b) = abs_bound {
        if e.max_abs_error >= b {
            return Err(format!("{}: max abs error {:e} >= {b:e}", e.identity_name, e.max_abs_error));
        }
    }
    Ok(format!("{} {:.1e}", e.identity_name, e.max_rel_error))
}

fn all(results: Vec<Outcome>) -> Outcome {
    let mut ok = Vec::new();
    for r in results {
        ok.push(r?);
    }
    Ok(ok.join("; "))
}

fn criterion_1() -> Outcome {
    let spec = torus_spec(
        c(0.0, 1.0),
        &[
            ("theta-quasi-periodicity", Some(1e-10), Some(100)),
            ("theta-parity", Some(1e-11), Some(100)),
            ("theta-heat", Some(1e-9), Some(100)),
        ],
    );
    let entries = run(&spec)?;
    let mut out = Vec::new();
    for base in ["theta-quasi-periodicity", "theta-parity", "theta-heat"] {
        for g in [1, 2] {
            out.push(check(entry(&entries, &format!("{base}/g{g}"))?, 100, None));
        }
    }
    all(out)
}

fn criterion_2() -> Outcome {
    let entries = run(&torus_spec(c(0.0, 1.0), &[("characteristic-census", None, Some(3))]))?;
    let e = entry(&entries, "characteristic-census")?;
    let counts: Vec<(f64, f64)> = e.records.iter().map(|r| (r.lhs[0].re, r.lhs[1].re)).collect();
    if counts != [(3.0, 1.0), (10.0, 6.0), (36.0, 28.0)] || e.max_abs_error != 0.0 || !e.passed {
        return Err(format!("counts {counts:?}"));
    }
    Ok(format!("{counts:?}"))
}

fn criterion_3() -> Outcome {
    let entries = run(&torus_spec(c(0.2, 1.1), &[("residue-normalization", Some(1e-8), Some(100))]))?;
    let e = entry(&entries, "residue-normalization")?;
    let mut ranks = [0usize; 3];
    for r in &e.records {
        let n = (r.lhs.len() as f64).sqrt() as usize;
        ranks[n - 1] += 1;
    }
    if ranks.contains(&0) {
        return Err(format!("rank coverage {ranks:?}"));
    }
    check(e, 100, Some(1e-8))
}

fn criterion_4() -> Outcome {
    let policy = TruncationPolicy::default();
    let sigma = calibrate_composition_sign(&policy).map_err(|e| e.to_string())?;
    if sigma != COMPOSITION_SIGN {
        return Err(format!("calibrated sign {sigma} differs from frozen {COMPOSITION_SIGN}"));
    }
    let trivial = DecomposableBundle::new(vec![BundlePoint::trivial()]).unwrap();
    let sphere = verify_composition_identity(
        "composition/sphere",
        &CurveModel::Sphere,
        &trivial,
        &TestFunction::SphereCoordinate,
        &[(PointOnCurve(c(1.0, 0.0)), PointOnCurve(c(2.0, 0.0)))],
        &policy,
        1e-13,
        0,
    )
    .map_err(|e| e.to_string())?;
    let rec = &sphere.records[0];
    let lhs = Complex64::from(rec.lhs[0]);
    let rhs = Complex64::from(rec.rhs[0]);
    if (lhs.norm() - 0.5).abs() > 1e-15 || (rhs.norm() - 0.5).abs() > 1e-15 || rec.abs_error >= 1e-13 || !sphere.passed {
        return Err(format!("sphere: lhs {lhs}, rhs {rhs}"));
    }
    let mut out = vec![Ok(format!("sphere {:.1e}", rec.abs_error))];
    // One sign for every modulus.
    for tau in [c(0.0, 1.0), c(0.5, 1.0), c(-0.3, 0.9)] {
        let entries = run(&torus_spec(tau, &[("composition", Some(1e-8), Some(100))]))?;
        out.push(check(entry(&entries, "composition/rank1")?, 100, None));
        out.push(check(entry(&entries, "composition/rank2")?, 100, None));
    }
    all(out)
}

fn criterion_5() -> Outcome {
    let policy = TruncationPolicy::default();
    let trivial = DecomposableBundle::new(vec![BundlePoint::trivial()]).unwrap();
    let sphere = verify_degenerate_identity(
        "degenerate/sphere",
        &CurveModel::Sphere,
        &trivial,
        &TestFunction::SphereCoordinate,
        &[PointOnCurve(c(2.0, 0.0))],
        &policy,
        1e-13,
        0,
    )
    .map_err(|e| e.to_string())?;
    let rhs = Complex64::from(sphere.records[0].rhs[0]);
    if (rhs - 0.25).norm() > 1e-16 || !sphere.passed {
        return Err(format!("sphere: rhs {rhs}, error {:e}", sphere.max_abs_error));
    }
    let entries = run(&torus_spec(c(0.0, 1.0), &[("degenerate", None, Some(100))]))?;
    let mut out = vec![Ok(format!("sphere {:.1e}", sphere.max_abs_error))];
    for rank in [1, 2] {
        let d = entry(&entries, &format!("degenerate/rank{rank}"))?;
        let l = entry(&entries, &format!("degenerate/rank{rank}/continuity"))?;
        if d.tolerance != 1e-7 || l.tolerance != 1e-5 {
            return Err("unexpected tolerances".into());
        }
        out.push(check(d, 100, None));
        out.push(check(l, 100, None));
    }
    all(out)
}

fn criterion_6() -> Outcome {
    let mut out = Vec::new();
    for tau in [c(0.0, 1.0), c(0.5, 1.0)] {
        let entries = run(&torus_spec(tau, &[("determinant", None, Some(100))]))?;
        for rank in 1..=3 {
            let e = entry(&entries, &format!("determinant/rank{rank}"))?;
            if e.tolerance != 1e-9 {
                return Err("unexpected tolerance".into());
            }
            out.push(check(e, 100, None));
        }
        let near = entry(&entries, "determinant/near-divisor-ratio")?;
        out.push(check(near, 6, Some(1e-6)));
    }
    all(out)
}

fn criterion_7() -> Outcome {
    let entries = run(&torus_spec(c(0.0, 1.0), &[("expansion-2delta", None, Some(100))]))?;
    all(vec![
        check(entry(&entries, "expansion-2delta")?, 100, Some(1e-7)),
        check(entry(&entries, "expansion-2delta/torsor")?, 100, Some(1e-8)),
    ])
}

fn criterion_8() -> Outcome {
    let mut out = Vec::new();
    for tau in [c(0.0, 1.0), c(0.2, 1.3)] {
        let entries = run(&torus_spec(tau, &[("divisor-behavior", None, None)]))?;
        out.push(check(entry(&entries, "divisor/log-pole-residue")?, 1, Some(1e-6)));
        let bounded = entry(&entries, "divisor/normalized-bounded")?;
        if !bounded.records[0].lhs.iter().all(|v| v.re.is_finite()) {
            return Err("normalized kernel not finite".into());
        }
        out.push(check(bounded, 1, None));
        out.push(check(entry(&entries, "divisor/diagonal-vanishing")?, 1, Some(1e-7)));
    }
    all(out)
}

fn criterion_9() -> Outcome {
    let entries = run(&torus_spec(c(0.0, 1.0), &[("expansion-3delta", None, Some(5))]))?;
    let spread = entry(&entries, "expansion-3delta/z-spread")?;
    let offset = entry(&entries, "expansion-3delta/offset")?;
    let taus: Vec<Complex64> = offset.records.iter().map(|r| r.inputs[0].value.into()).collect();
    if taus.len() != 5 || taus.iter().zip(FROZEN_OFFSETS).any(|(t, (f, _))| *t != f) {
        return Err(format!("moduli {taus:?}"));
    }
    all(vec![check(spread, 5, Some(1e-7)), check(offset, 5, Some(1e-7))])
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec_path = dir.path().join("spec.json");
    let spec = torus_spec(
        c(0.0, 1.0),
        &[("composition", None, Some(40)), ("expansion-2delta", None, Some(20)), ("theta-heat", None, Some(20))],
    );
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for i in 0..2 {
        let out_path = dir.path().join(format!("report{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_szego"))
            .args(["verify", spec_path.to_str().unwrap(), "--output", out_path.to_str().unwrap()])
            .env_remove("SZEGO_POLICY")
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("verify exited with {status}"));
        }
        reports.push(std::fs::read(&out_path).map_err(|e| e.to_string())?);
    }
    if reports[0] != reports[1] {
        return Err("reports differ between runs".into());
    }
    let mut worst: f64 = 0.0;
    for (tau, _) in FROZEN_OFFSETS {
        let a = fixtures_for(tau, 10).map_err(|e| e.to_string())?;
        let b = fixtures_for(tau, 20).map_err(|e| e.to_string())?;
        for (x, y) in a.iter().zip(&b) {
            let (vx, vy) = (Complex64::from(x.value), Complex64::from(y.value));
            worst = worst.max((vx - vy).norm() / (1.0 + vx.norm()));
        }
    }
    if worst > 1e-14 {
        return Err(format!("refreeze changed a fixture by {worst:e}"));
    }
    // Guard against a silently trivial oracle: values must be genuine.
    let theta0 = &fixtures_for(c(0.0, 1.0), 10).map_err(|e| e.to_string())?[0];
    if (theta0.value.re - 1.086_434_811_213_308).abs() > 1e-15 {
        return Err("theta(0, i) fixture drifted".into());
    }
    Ok(format!("{} bytes identical; refreeze max change {worst:.1e}", reports[0].len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("theta engine invariants", criterion_1),
        ("characteristic census", criterion_2),
        ("residue normalization", criterion_3),
        ("composition identity", criterion_4),
        ("degenerate identity", criterion_5),
        ("determinant theorem", criterion_6),
        ("connection from the 2-jet", criterion_7),
        ("behavior across the theta divisor", criterion_8),
        ("extended connection from the 3-jet", criterion_9),
        ("determinism and fixture refreeze", criterion_10),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match f() {
            Ok(detail) => println!("[PASS] criterion {} ({name}) in {:.1}s: {detail}", i + 1, t.elapsed().as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("[FAIL] criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
