//! End-to-end numerical verification of the kernel identities.
//!
//! Every check produces an [`IdentityReport`]: per-instance left and right
//! hand sides, absolute errors, and errors relative to
//! `1 + max(|lhs|, |rhs|)`. A report passes iff its largest relative error
//! is within tolerance. Instances that fail to evaluate are recorded with
//! their error message and count as `f64::MAX`.
//!
//! Instances are evaluated in parallel and collected in input order, so a
//! report is a deterministic function of its inputs.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{enumerate_characteristics, Parity, RiemannMatrix, TruncationPolicy};
use crate::curves::{
    theta_zero_guess, zeros_and_df, BundlePoint, CurveModel, DecomposableBundle, PointOnCurve, TestFunction,
};
use crate::error::{Error, Result};
use crate::expansions::{
    diagonal_expansion, diagonal_expansion_matrix, dlog_theta_tau, dlog_theta_z, log_pole_scan,
    normalized_diagonal_expansion, DivisorCrossing, ExpansionOptions,
};
use crate::kernels::{det_szego_vs_theta_pullback, normalized_szego, szego_matrix};
use crate::sampling::{curve_distance, SAMPLE_MARGIN};
use crate::theta::{lattice_shift, theta, theta_quasi_period_factor, ThetaRequest};

/// Sign `sigma` relating the two sides of the composition identity in the
/// coordinate trivialization: `sigma * sum_a s(x,a) s(a,y) / df(a)` equals
/// `(f(y) - f(x)) / (f(y) f(x)) s(x,y)`. Fixed by the sphere instance, see
/// [`calibrate_composition_sign`].
pub const COMPOSITION_SIGN: f64 = -1.0;

/// Error value recorded for instances that could not be evaluated.
pub const FAILED_INSTANCE_ERROR: f64 = f64::MAX;

/// `-theta_1'''(0) / (6 theta_1'(0))` frozen from a 40-digit mpmath
/// evaluation, keyed by `tau`.
pub const FROZEN_OFFSETS: [(Complex64, Complex64); 5] = [
    (Complex64::new(0.0, 1.0), Complex64::new(std::f64::consts::FRAC_PI_2, 0.0)),
    (Complex64::new(0.5, 1.0), Complex64::new(1.718_245_751_632_643_2, 0.0)),
    (Complex64::new(0.2, 1.3), Complex64::new(1.641_482_669_453_252_2, -0.010_651_621_204_178_938)),
    (Complex64::new(-0.3, 0.9), Complex64::new(1.688_806_234_194_988, 0.130_571_286_418_672_34)),
    (Complex64::new(0.0, 1.5), Complex64::new(1.641_747_406_210_935, 0.0)),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<JsonComplex> for Complex64 {
    fn from(c: JsonComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: JsonComplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub inputs: Vec<NamedValue>,
    pub lhs: Vec<JsonComplex>,
    pub rhs: Vec<JsonComplex>,
    pub abs_error: f64,
    pub rel_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn named(values: &[(&str, Complex64)]) -> Vec<NamedValue> {
    values
        .iter()
        .map(|(name, v)| NamedValue { name: (*name).to_string(), value: (*v).into() })
        .collect()
}

impl InstanceRecord {
    /// Compares two equal-length value lists entrywise.
    pub fn compare(inputs: Vec<NamedValue>, lhs: &[Complex64], rhs: &[Complex64]) -> Self {
        let abs_error = lhs.iter().zip(rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = lhs.iter().chain(rhs).map(|v| v.norm()).fold(0.0, f64::max);
        let mut rel_error = abs_error / (1.0 + scale);
        let mut abs_error = abs_error;
        if lhs.len() != rhs.len() || !abs_error.is_finite() || !rel_error.is_finite() {
            abs_error = FAILED_INSTANCE_ERROR;
            rel_error = FAILED_INSTANCE_ERROR;
        }
        Self {
            inputs,
            lhs: lhs.iter().map(|&v| v.into()).collect(),
            rhs: rhs.iter().map(|&v| v.into()).collect(),
            abs_error,
            rel_error,
            error: None,
        }
    }

    /// A record whose error metric is computed by the caller.
    pub fn with_errors(
        inputs: Vec<NamedValue>,
        lhs: &[Complex64],
        rhs: &[Complex64],
        abs_error: f64,
        rel_error: f64,
    ) -> Self {
        let mut r = Self::compare(inputs, lhs, rhs);
        r.abs_error = abs_error;
        r.rel_error = rel_error;
        r
    }

    pub fn failed(inputs: Vec<NamedValue>, err: &Error) -> Self {
        Self {
            inputs,
            lhs: Vec::new(),
            rhs: Vec::new(),
            abs_error: FAILED_INSTANCE_ERROR,
            rel_error: FAILED_INSTANCE_ERROR,
            error: Some(err.to_string()),
        }
    }

    fn from_result(inputs: Vec<NamedValue>, result: Result<Self>) -> Self {
        match result {
            Ok(r) => r,
            Err(e) => Self::failed(inputs, &e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity_name: String,
    pub instances: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub records: Vec<InstanceRecord>,
}

impl IdentityReport {
    pub fn from_records(name: &str, tolerance: f64, seed: u64, records: Vec<InstanceRecord>) -> Self {
        let max_abs_error = records.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        let max_rel_error = records.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        Self {
            identity_name: name.to_string(),
            instances: records.len(),
            max_abs_error,
            max_rel_error,
            tolerance,
            passed: max_rel_error <= tolerance,
            seed,
            records,
        }
    }

    /// Number of records that failed to evaluate.
    pub fn evaluation_failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

fn flatten(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.iter().copied().collect()
}

// ---------------------------------------------------------------------------
// Theta engine invariants

/// One random quasi-periodicity instance.
#[derive(Debug, Clone)]
pub struct ThetaInstance {
    pub tau: RiemannMatrix,
    pub z: Vec<Complex64>,
    pub m: Vec<i64>,
    pub n: Vec<i64>,
}

/// `theta(z + tau m + n) / factor = theta(z)`; the shifted value is divided
/// by the automorphy factor so that errors stay on the scale of `theta(z)`.
pub fn verify_theta_quasi_periodicity(
    instances: &[ThetaInstance],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let mut inputs = named(&[("tau_00", inst.tau.entry(0, 0))]);
            inputs.extend(inst.z.iter().enumerate().map(|(j, &v)| NamedValue {
                name: format!("z_{j}"),
                value: v.into(),
            }));
            inputs.extend(inst.m.iter().zip(&inst.n).enumerate().map(|(j, (&m, &n))| NamedValue {
                name: format!("m_{j},n_{j}"),
                value: Complex64::new(m as f64, n as f64).into(),
            }));
            let run = || -> Result<InstanceRecord> {
                let shifted = lattice_shift(&inst.z, &inst.m, &inst.n, &inst.tau);
                let lhs = theta(&ThetaRequest::new(&shifted, &inst.tau).policy(*policy))?;
                let factor = theta_quasi_period_factor(&inst.z, &inst.m, &inst.n, &inst.tau)?;
                let rhs = theta(&ThetaRequest::new(&inst.z, &inst.tau).policy(*policy))?;
                Ok(InstanceRecord::compare(inputs.clone(), &[lhs / factor], &[rhs]))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("theta-quasi-periodicity", tolerance, seed, records)
}

/// `theta[a,b](-z) = (-1)^{4 a.b} theta[a,b](z)` for every characteristic.
pub fn verify_theta_parity(
    instances: &[ThetaInstance],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let mut inputs = named(&[("tau_00", inst.tau.entry(0, 0))]);
            inputs.extend(inst.z.iter().enumerate().map(|(j, &v)| NamedValue {
                name: format!("z_{j}"),
                value: v.into(),
            }));
            let run = || -> Result<InstanceRecord> {
                let neg: Vec<Complex64> = inst.z.iter().map(|v| -v).collect();
                let mut lhs = Vec::new();
                let mut rhs = Vec::new();
                for (ch, p) in enumerate_characteristics(inst.tau.genus())? {
                    let sign = if p == Parity::Even { 1.0 } else { -1.0 };
                    lhs.push(theta(&ThetaRequest::new(&neg, &inst.tau).characteristic(&ch).policy(*policy))?);
                    rhs.push(sign * theta(&ThetaRequest::new(&inst.z, &inst.tau).characteristic(&ch).policy(*policy))?);
                }
                Ok(InstanceRecord::compare(inputs.clone(), &lhs, &rhs))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("theta-parity", tolerance, seed, records)
}

/// Heat equation `d^2 theta / dz_j dz_k = 2 pi i (1 + delta_jk) d theta / d tau_jk`
/// with term-wise derivatives on both sides.
pub fn verify_theta_heat(
    instances: &[ThetaInstance],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let inputs = named(&[("tau_00", inst.tau.entry(0, 0)), ("z_0", inst.z[0])]);
            let run = || -> Result<InstanceRecord> {
                let g = inst.tau.genus();
                let mut lhs = Vec::new();
                let mut rhs = Vec::new();
                for j in 0..g {
                    for k in j..g {
                        let mut orders = vec![0; g];
                        orders[j] += 1;
                        orders[k] += 1;
                        let base = ThetaRequest::new(&inst.z, &inst.tau).policy(*policy);
                        lhs.push(theta(&base.clone().deriv_z(&orders))?);
                        let factor = if j == k { 4.0 } else { 2.0 };
                        rhs.push(factor * PI * Complex64::i() * theta(&base.deriv_tau(j, k))?);
                    }
                }
                Ok(InstanceRecord::compare(inputs.clone(), &lhs, &rhs))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("theta-heat", tolerance, seed, records)
}

/// Genus-1 cross-check of the term-wise `tau` derivative against a central
/// difference in `tau` with step `step`.
pub fn verify_theta_tau_finite_difference(
    instances: &[ThetaInstance],
    policy: &TruncationPolicy,
    step: f64,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let inputs = named(&[("tau_00", inst.tau.entry(0, 0)), ("z_0", inst.z[0])]);
            let run = || -> Result<InstanceRecord> {
                let t0 = inst.tau.scalar()?;
                let termwise = theta(&ThetaRequest::new(&inst.z, &inst.tau).deriv_tau(0, 0).policy(*policy))?;
                let plus = RiemannMatrix::genus_one(t0 + step)?;
                let minus = RiemannMatrix::genus_one(t0 - step)?;
                let fp = theta(&ThetaRequest::new(&inst.z, &plus).policy(*policy))?;
                let fm = theta(&ThetaRequest::new(&inst.z, &minus).policy(*policy))?;
                Ok(InstanceRecord::compare(inputs.clone(), &[(fp - fm) / (2.0 * step)], &[termwise]))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("theta-heat/tau-finite-difference", tolerance, seed, records)
}

/// Even/odd characteristic counts against `2^{g-1}(2^g +- 1)` for each genus.
pub fn verify_characteristic_census(genera: &[usize], seed: u64) -> IdentityReport {
    let records = genera
        .iter()
        .map(|&g| {
            let inputs = named(&[("genus", Complex64::new(g as f64, 0.0))]);
            let run = || -> Result<InstanceRecord> {
                let list = enumerate_characteristics(g)?;
                let even = list.iter().filter(|(_, p)| *p == Parity::Even).count();
                let odd = list.len() - even;
                let half = (1u64 << (g - 1)) as f64;
                let full = (1u64 << g) as f64;
                Ok(InstanceRecord::compare(
                    inputs.clone(),
                    &[Complex64::new(even as f64, 0.0), Complex64::new(odd as f64, 0.0)],
                    &[Complex64::new(half * (full + 1.0), 0.0), Complex64::new(half * (full - 1.0), 0.0)],
                ))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("characteristic-census", 0.0, seed, records)
}

// ---------------------------------------------------------------------------
// Composition identity

/// Determines `sigma` from the sphere instance `x = 1`, `y = 2`, `f = zeta`,
/// where both sides are available in closed form.
pub fn calibrate_composition_sign(policy: &TruncationPolicy) -> Result<f64> {
    let curve = CurveModel::Sphere;
    let bundle = DecomposableBundle::new(vec![BundlePoint::trivial()])?;
    let f = TestFunction::SphereCoordinate;
    let zeros = zeros_and_df(&f, &curve, policy)?;
    let (x, y) = (PointOnCurve(Complex64::new(1.0, 0.0)), PointOnCurve(Complex64::new(2.0, 0.0)));
    let (raw, rhs) = composition_sides(x, y, &bundle, &f, &zeros, &curve, policy, 1.0)?;
    let ratio = rhs[0] / raw[0];
    for sign in [1.0, -1.0] {
        if (ratio - sign).norm() < 1e-14 {
            return Ok(sign);
        }
    }
    Err(Error::SignCalibration(format!("sphere ratio rhs/lhs = {ratio} is not +-1")))
}

#[allow(clippy::too_many_arguments)]
fn composition_sides(
    x: PointOnCurve,
    y: PointOnCurve,
    bundle: &DecomposableBundle,
    f: &TestFunction,
    zeros: &[(PointOnCurve, Complex64)],
    curve: &CurveModel,
    policy: &TruncationPolicy,
    sign: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = bundle.rank();
    let mut lhs = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (alpha, df) in zeros {
        let left = szego_matrix(x, *alpha, bundle, curve, policy)?.values;
        let right = szego_matrix(*alpha, y, bundle, curve, policy)?.values;
        lhs += (left * right) / *df;
    }
    lhs *= Complex64::new(sign, 0.0);
    let fx = f.value(x.0, curve, policy)?;
    let fy = f.value(y.0, curve, policy)?;
    let rhs = szego_matrix(x, y, bundle, curve, policy)?.values * ((fy - fx) / (fy * fx));
    Ok((flatten(&lhs), flatten(&rhs)))
}

fn degenerate_sides(
    y: PointOnCurve,
    bundle: &DecomposableBundle,
    f: &TestFunction,
    zeros: &[(PointOnCurve, Complex64)],
    curve: &CurveModel,
    policy: &TruncationPolicy,
    sign: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = bundle.rank();
    let mut lhs = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (alpha, df) in zeros {
        let left = szego_matrix(y, *alpha, bundle, curve, policy)?.values;
        let right = szego_matrix(*alpha, y, bundle, curve, policy)?.values;
        lhs += (left * right) / *df;
    }
    lhs *= Complex64::new(sign, 0.0);
    let fy = f.value(y.0, curve, policy)?;
    let dfy = f.derivative(y.0, curve, policy)?;
    let rhs = DMatrix::from_diagonal_element(n, n, dfy / (fy * fy));
    Ok((flatten(&lhs), flatten(&rhs)))
}

/// Points that samples must stay away from: zeros and poles of `f`.
pub fn singular_points(f: &TestFunction, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Vec<Complex64>> {
    let mut pts: Vec<Complex64> = zeros_and_df(f, curve, policy)?.iter().map(|(a, _)| a.0).collect();
    pts.extend(f.poles());
    Ok(pts)
}

fn check_margin(curve: &CurveModel, p: Complex64, singular: &[Complex64], what: &str) -> Result<()> {
    for &s in singular {
        if curve_distance(curve, p, s) < SAMPLE_MARGIN {
            return Err(Error::SampleTooCloseToSingularity(format!("{what} = {p} is within {SAMPLE_MARGIN} of {s}")));
        }
    }
    Ok(())
}

fn bundle_inputs(bundle: &DecomposableBundle) -> Vec<NamedValue> {
    bundle
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| NamedValue { name: format!("bundle_{i}"), value: p.z().into() })
        .collect()
}

/// Sign-checked comparison: fails loudly when an instance matches with the
/// opposite sign but not with the calibrated one.
fn sign_checked(
    inputs: Vec<NamedValue>,
    lhs: &[Complex64],
    rhs: &[Complex64],
    tolerance: f64,
) -> Result<InstanceRecord> {
    let record = InstanceRecord::compare(inputs.clone(), lhs, rhs);
    if record.rel_error > tolerance {
        let flipped: Vec<Complex64> = lhs.iter().map(|v| -v).collect();
        let alt = InstanceRecord::compare(inputs, &flipped, rhs);
        if alt.rel_error <= tolerance {
            return Err(Error::SignCalibration(format!(
                "instance satisfies the identity only with sign {} (error {:e} vs {:e})",
                -COMPOSITION_SIGN, alt.rel_error, record.rel_error
            )));
        }
    }
    Ok(record)
}

/// `sigma sum_{a in f^{-1}(0)} s(x,a) s(a,y) / df(a) = (f(y)-f(x))/(f(y)f(x)) s(x,y)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_composition_identity(
    name: &str,
    curve: &CurveModel,
    bundle: &DecomposableBundle,
    f: &TestFunction,
    pairs: &[(PointOnCurve, PointOnCurve)],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> Result<IdentityReport> {
    let sign = calibrate_composition_sign(policy)?;
    let zeros = zeros_and_df(f, curve, policy)?;
    let singular = singular_points(f, curve, policy)?;
    let records = pairs
        .par_iter()
        .map(|&(x, y)| {
            let mut inputs = named(&[("x", x.0), ("y", y.0)]);
            inputs.extend(bundle_inputs(bundle));
            let run = || -> Result<InstanceRecord> {
                check_margin(curve, x.0, &singular, "x")?;
                check_margin(curve, y.0, &singular, "y")?;
                check_margin(curve, y.0, &[x.0], "y")?;
                let (lhs, rhs) = composition_sides(x, y, bundle, f, &zeros, curve, policy, sign)?;
                sign_checked(inputs.clone(), &lhs, &rhs, tolerance)
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    Ok(IdentityReport::from_records(name, tolerance, seed, records))
}

/// `sigma sum_a s(y,a) s(a,y) / df(a) = df(y) / f(y)^2 Id`.
#[allow(clippy::too_many_arguments)]
pub fn verify_degenerate_identity(
    name: &str,
    curve: &CurveModel,
    bundle: &DecomposableBundle,
    f: &TestFunction,
    points: &[PointOnCurve],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> Result<IdentityReport> {
    let sign = calibrate_composition_sign(policy)?;
    let zeros = zeros_and_df(f, curve, policy)?;
    let singular = singular_points(f, curve, policy)?;
    let records = points
        .par_iter()
        .map(|&y| {
            let mut inputs = named(&[("y", y.0)]);
            inputs.extend(bundle_inputs(bundle));
            let run = || -> Result<InstanceRecord> {
                check_margin(curve, y.0, &singular, "y")?;
                let (lhs, rhs) = degenerate_sides(y, bundle, f, &zeros, curve, policy, sign)?;
                sign_checked(inputs.clone(), &lhs, &rhs, tolerance)
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    Ok(IdentityReport::from_records(name, tolerance, seed, records))
}

/// Continuity across the diagonal: both sides of the composition identity at
/// `x = y -+ step`, averaged (a central estimate of the `x -> y` limit),
/// against the two sides of the degenerate identity at `y`.
#[allow(clippy::too_many_arguments)]
pub fn verify_degenerate_continuity(
    name: &str,
    curve: &CurveModel,
    bundle: &DecomposableBundle,
    f: &TestFunction,
    points: &[PointOnCurve],
    step: f64,
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> Result<IdentityReport> {
    let sign = calibrate_composition_sign(policy)?;
    let zeros = zeros_and_df(f, curve, policy)?;
    let singular = singular_points(f, curve, policy)?;
    let records = points
        .par_iter()
        .map(|&y| {
            let mut inputs = named(&[("y", y.0), ("step", Complex64::new(step, 0.0))]);
            inputs.extend(bundle_inputs(bundle));
            let run = || -> Result<InstanceRecord> {
                check_margin(curve, y.0, &singular, "y")?;
                let (dl, dr) = degenerate_sides(y, bundle, f, &zeros, curve, policy, sign)?;
                let (l1, r1) =
                    composition_sides(PointOnCurve(y.0 - step), y, bundle, f, &zeros, curve, policy, sign)?;
                let (l2, r2) =
                    composition_sides(PointOnCurve(y.0 + step), y, bundle, f, &zeros, curve, policy, sign)?;
                let mut limit: Vec<Complex64> = l1.iter().zip(&l2).map(|(a, b)| 0.5 * (a + b)).collect();
                limit.extend(r1.iter().zip(&r2).map(|(a, b)| 0.5 * (a + b)));
                let mut target = dl;
                target.extend(dr);
                Ok(InstanceRecord::compare(inputs.clone(), &limit, &target))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    Ok(IdentityReport::from_records(name, tolerance, seed, records))
}

// ---------------------------------------------------------------------------
// Determinant theorem

#[derive(Debug, Clone)]
pub struct KernelInstance {
    pub x: PointOnCurve,
    pub y: PointOnCurve,
    pub bundle: DecomposableBundle,
}

/// `det s_E(x, y)` against `prod theta(z_i + y - x) / (prod theta(z_i) E(x,y)^n)`.
pub fn verify_determinant_theorem(
    name: &str,
    curve: &CurveModel,
    instances: &[KernelInstance],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let mut inputs = named(&[("x", inst.x.0), ("y", inst.y.0)]);
            inputs.extend(bundle_inputs(&inst.bundle));
            let run = || -> Result<InstanceRecord> {
                let (lhs, rhs) = det_szego_vs_theta_pullback(inst.x, inst.y, &inst.bundle, curve, policy)?;
                Ok(InstanceRecord::compare(inputs.clone(), &[lhs], &[rhs]))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records(name, tolerance, seed, records)
}

/// Rank-3 bundle whose last component approaches the theta zero `z*` along
/// `z* + eps`; each record compares `lhs / rhs` with 1 and stores both sides.
#[allow(clippy::too_many_arguments)]
pub fn verify_determinant_near_divisor(
    curve: &CurveModel,
    x: PointOnCurve,
    y: PointOnCurve,
    fixed: [Complex64; 2],
    epsilons: &[f64],
    policy: &TruncationPolicy,
    tolerance: f64,
    seed: u64,
) -> Result<IdentityReport> {
    let tau = curve.tau().ok_or(Error::CurveMismatch)?;
    let star = crate::expansions::find_theta_zero(theta_zero_guess(tau.scalar()?), tau, policy)?;
    let records = epsilons
        .par_iter()
        .map(|&eps| {
            let z3 = star + Complex64::new(eps, 0.0);
            let inputs = named(&[("x", x.0), ("y", y.0), ("bundle_2", z3), ("eps", Complex64::new(eps, 0.0))]);
            let run = || -> Result<InstanceRecord> {
                let bundle = DecomposableBundle::on_curve(&[fixed[0], fixed[1], z3], curve, policy)?;
                let (lhs, rhs) = det_szego_vs_theta_pullback(x, y, &bundle, curve, policy)?;
                let ratio = lhs / rhs;
                let err = (ratio - 1.0).norm();
                Ok(InstanceRecord::with_errors(inputs.clone(), &[lhs, ratio], &[rhs, Complex64::new(1.0, 0.0)], err, err))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    Ok(IdentityReport::from_records("determinant/near-divisor-ratio", tolerance, seed, records))
}

// ---------------------------------------------------------------------------
// Diagonal expansions

#[derive(Debug, Clone)]
pub struct ExpansionInstance {
    pub tau: RiemannMatrix,
    pub x: PointOnCurve,
    pub z: Complex64,
}

/// `c_{-1}` of the matrix kernel against the identity.
pub fn verify_residue_normalization(
    curve: &CurveModel,
    instances: &[(PointOnCurve, DecomposableBundle)],
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|(x, bundle)| {
            let mut inputs = named(&[("x", x.0)]);
            inputs.extend(bundle_inputs(bundle));
            let run = || -> Result<InstanceRecord> {
                let e = diagonal_expansion_matrix(*x, bundle, curve, policy, opts)?;
                let id = DMatrix::<Complex64>::identity(bundle.rank(), bundle.rank());
                Ok(InstanceRecord::compare(inputs.clone(), &flatten(&e.c_minus1), &flatten(&id)))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("residue-normalization", tolerance, seed, records)
}

/// `c_0` of the contour expansion against term-wise `d_z log theta`.
pub fn verify_connection_identification(
    instances: &[ExpansionInstance],
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|inst| {
            let inputs = named(&[("tau", inst.tau.entry(0, 0)), ("x", inst.x.0), ("z", inst.z)]);
            let run = || -> Result<InstanceRecord> {
                let curve = CurveModel::from_matrix(inst.tau.clone())?;
                let bundle = BundlePoint::on_torus(inst.z, &inst.tau, policy)?;
                let e = diagonal_expansion(inst.x, &bundle, &curve, policy, opts)?;
                let d = dlog_theta_z(&bundle, &inst.tau, policy)?;
                Ok(InstanceRecord::compare(inputs.clone(), &[e.c0], &[d]))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("expansion-2delta", tolerance, seed, records)
}

/// Differences of connections: `c_0(z) - c_0(z')` against
/// `d_z log theta(z) - d_z log theta(z')`.
pub fn verify_torsor_difference(
    instances: &[(ExpansionInstance, Complex64)],
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
    tolerance: f64,
    seed: u64,
) -> IdentityReport {
    let records = instances
        .par_iter()
        .map(|(inst, z2)| {
            let inputs = named(&[("tau", inst.tau.entry(0, 0)), ("x", inst.x.0), ("z", inst.z), ("z_prime", *z2)]);
            let run = || -> Result<InstanceRecord> {
                let curve = CurveModel::from_matrix(inst.tau.clone())?;
                let b1 = BundlePoint::on_torus(inst.z, &inst.tau, policy)?;
                let b2 = BundlePoint::on_torus(*z2, &inst.tau, policy)?;
                let e1 = diagonal_expansion(inst.x, &b1, &curve, policy, opts)?;
                let e2 = diagonal_expansion(inst.x, &b2, &curve, policy, opts)?;
                let d1 = dlog_theta_z(&b1, &inst.tau, policy)?;
                let d2 = dlog_theta_z(&b2, &inst.tau, policy)?;
                Ok(InstanceRecord::compare(inputs.clone(), &[e1.c0 - e2.c0], &[d1 - d2]))
            };
            InstanceRecord::from_result(inputs.clone(), run())
        })
        .collect();
    IdentityReport::from_records("expansion-2delta/torsor", tolerance, seed, records)
}

/// `c_1 - 2 pi i d_tau log theta` over several bundles at one `tau`.
pub fn extended_offsets(
    tau: &RiemannMatrix,
    x: PointOnCurve,
    zs: &[Complex64],
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
) -> Result<Vec<Complex64>> {
    let curve = CurveModel::from_matrix(tau.clone())?;
    zs.par_iter()
        .map(|&z| {
            let bundle = BundlePoint::on_torus(z, tau, policy)?;
            let e = diagonal_expansion(x, &bundle, &curve, policy, opts)?;
            let dt = dlog_theta_tau(&bundle, tau, policy)?;
            Ok(e.c1 - 2.0 * PI * Complex64::i() * dt)
        })
        .collect()
}

/// For each `tau`: the spread `max |v_i - v_j|` of
/// `v = c_1 - 2 pi i d_tau log theta` over the given bundles (first report),
/// and the mean of `v` against an expected constant (second report).
pub fn verify_extended_connection(
    cases: &[(RiemannMatrix, Vec<Complex64>, Complex64)],
    x: PointOnCurve,
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
    spread_tolerance: f64,
    offset_tolerance: f64,
    seed: u64,
) -> (IdentityReport, IdentityReport) {
    let results: Vec<(InstanceRecord, InstanceRecord)> = cases
        .iter()
        .map(|(tau, zs, expected)| {
            let inputs = named(&[("tau", tau.entry(0, 0)), ("x", x.0)]);
            match extended_offsets(tau, x, zs, policy, opts) {
                Ok(v) => {
                    let mut spread: f64 = 0.0;
                    for a in &v {
                        for b in &v {
                            spread = spread.max((a - b).norm());
                        }
                    }
                    let mean = v.iter().sum::<Complex64>() / v.len() as f64;
                    let first = vec![v[0]; v.len()];
                    let s = InstanceRecord::with_errors(inputs.clone(), &v, &first, spread, spread);
                    (s, InstanceRecord::compare(inputs, &[mean], &[*expected]))
                }
                Err(e) => (InstanceRecord::failed(inputs.clone(), &e), InstanceRecord::failed(inputs, &e)),
            }
        })
        .collect();
    let (spreads, offsets): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    (
        IdentityReport::from_records("expansion-3delta/z-spread", spread_tolerance, seed, spreads),
        IdentityReport::from_records("expansion-3delta/offset", offset_tolerance, seed, offsets),
    )
}

/// Frozen offset for `tau`, if it is one of the tabulated moduli.
pub fn frozen_offset(tau: Complex64) -> Option<Complex64> {
    FROZEN_OFFSETS.iter().find(|(t, _)| *t == tau).map(|(_, v)| *v)
}

// ---------------------------------------------------------------------------
// Behaviour across the theta divisor

/// Tolerances of the three divisor checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorTolerances {
    pub residue: f64,
    pub boundedness: f64,
    pub diagonal_vanishing: f64,
}

impl Default for DivisorTolerances {
    fn default() -> Self {
        Self { residue: 1e-6, boundedness: 1e-3, diagonal_vanishing: 1e-7 }
    }
}

/// Half-length of the path used for the boundedness check.
pub const BOUNDEDNESS_PATH_HALF_LENGTH: f64 = 0.1;

fn max_normalized_along_path(
    crossing: &DivisorCrossing,
    zero: Complex64,
    curve: &CurveModel,
    samples: usize,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let x = crossing.base_point;
    let y = PointOnCurve(x.0 + Complex64::new(0.3, 0.1));
    let dir = crossing.direction / crossing.direction.norm();
    let values = (0..=samples)
        .into_par_iter()
        .map(|i| {
            let t = BOUNDEDNESS_PATH_HALF_LENGTH * (2.0 * i as f64 / samples as f64 - 1.0);
            let bundle = BundlePoint::on_curve(zero + t * dir, curve, policy)?;
            Ok(normalized_szego(x, y, &bundle, curve, policy)?.value.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = values.iter().copied().fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("normalized kernel along path"));
    }
    Ok(max)
}

/// Log-pole residue of `c_0`, boundedness of the normalized kernel along a
/// path through the divisor (maximum over `samples + 1` points against
/// `2 samples + 1` points), and the vanishing of its diagonal residue at
/// the zero.
#[allow(clippy::too_many_arguments)]
pub fn verify_divisor_behavior(
    tau: &RiemannMatrix,
    crossing: &DivisorCrossing,
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
    steps: usize,
    samples: usize,
    tolerances: &DivisorTolerances,
    seed: u64,
) -> Result<Vec<IdentityReport>> {
    let curve = CurveModel::from_matrix(tau.clone())?;
    let scan = log_pole_scan(crossing, tau, policy, steps, opts)?;
    let inputs = named(&[("tau", tau.entry(0, 0)), ("zero", scan.zero), ("direction", crossing.direction)]);
    let residue = InstanceRecord::compare(inputs.clone(), &[scan.residue_estimate], &[Complex64::new(1.0, 0.0)]);

    let bounded = (|| -> Result<InstanceRecord> {
        let coarse = max_normalized_along_path(crossing, scan.zero, &curve, samples, policy)?;
        let fine = max_normalized_along_path(crossing, scan.zero, &curve, 2 * samples, policy)?;
        Ok(InstanceRecord::compare(
            inputs.clone(),
            &[Complex64::new(coarse, 0.0)],
            &[Complex64::new(fine, 0.0)],
        ))
    })();
    let bounded = InstanceRecord::from_result(inputs.clone(), bounded);

    let vanishing = (|| -> Result<InstanceRecord> {
        let bundle = BundlePoint::on_curve(scan.zero, &curve, policy)?;
        let c = normalized_diagonal_expansion(crossing.base_point, &bundle, &curve, policy, opts)?;
        Ok(InstanceRecord::compare(inputs.clone(), &[c[0]], &[Complex64::new(0.0, 0.0)]))
    })();
    let vanishing = InstanceRecord::from_result(inputs.clone(), vanishing);

    Ok(vec![
        IdentityReport::from_records("divisor/log-pole-residue", tolerances.residue, seed, vec![residue]),
        IdentityReport::from_records("divisor/normalized-bounded", tolerances.boundedness, seed, vec![bounded]),
        IdentityReport::from_records(
            "divisor/diagonal-vanishing",
            tolerances.diagonal_vanishing,
            seed,
            vec![vanishing],
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Sampler;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn calibrated_sign_is_frozen_constant() {
        assert_eq!(calibrate_composition_sign(&pol()).unwrap(), COMPOSITION_SIGN);
    }

    #[test]
    fn sphere_composition_instance() {
        let bundle = DecomposableBundle::new(vec![BundlePoint::trivial()]).unwrap();
        let pairs = [(PointOnCurve(c(1.0, 0.0)), PointOnCurve(c(2.0, 0.0)))];
        let r = verify_composition_identity(
            "composition",
            &CurveModel::Sphere,
            &bundle,
            &TestFunction::SphereCoordinate,
            &pairs,
            &pol(),
            1e-13,
            0,
        )
        .unwrap();
        assert!(r.passed);
        let rec = &r.records[0];
        assert!((Complex64::from(rec.lhs[0]).norm() - 0.5).abs() < 1e-15);
        assert!((Complex64::from(rec.rhs[0]).norm() - 0.5).abs() < 1e-15);
        assert!(r.max_abs_error < 1e-14);
    }

    #[test]
    fn sphere_degenerate_instance() {
        let bundle = DecomposableBundle::new(vec![BundlePoint::trivial()]).unwrap();
        let r = verify_degenerate_identity(
            "degenerate",
            &CurveModel::Sphere,
            &bundle,
            &TestFunction::SphereCoordinate,
            &[PointOnCurve(c(2.0, 0.0))],
            &pol(),
            1e-13,
            0,
        )
        .unwrap();
        assert!(r.passed);
        assert!((Complex64::from(r.records[0].rhs[0]) - 0.25).norm() < 1e-16);
    }

    #[test]
    fn wrong_sign_fails_loudly() {
        let rec = sign_checked(Vec::new(), &[c(-1.0, 0.0)], &[c(1.0, 0.0)], 1e-8);
        assert!(matches!(rec, Err(Error::SignCalibration(_))));
    }

    #[test]
    fn samples_too_close_are_recorded() {
        let curve = CurveModel::torus(c(0.0, 1.0)).unwrap();
        let tau = curve.tau().unwrap().clone();
        let f = TestFunction::weierstrass_shifted(c(0.3, 0.0), &tau, &pol()).unwrap();
        let bundle = DecomposableBundle::on_curve(&[c(0.1, 0.1)], &curve, &pol()).unwrap();
        let pairs = [(PointOnCurve(c(0.3 + 1e-4, 0.0)), PointOnCurve(c(0.7, 0.2)))];
        let r = verify_composition_identity("composition", &curve, &bundle, &f, &pairs, &pol(), 1e-8, 0).unwrap();
        assert!(!r.passed);
        assert!(r.records[0].error.as_deref().unwrap().contains("too close"));
    }

    #[test]
    fn on_divisor_bundle_recorded_per_instance() {
        let curve = CurveModel::torus(c(0.0, 1.0)).unwrap();
        let tau = curve.tau().unwrap().clone();
        let f = TestFunction::weierstrass_shifted(c(0.3, 0.0), &tau, &pol()).unwrap();
        let bundle = DecomposableBundle::on_curve(&[theta_zero_guess(c(0.0, 1.0))], &curve, &pol()).unwrap();
        let pairs = [(PointOnCurve(c(0.1, 0.2)), PointOnCurve(c(0.7, 0.4)))];
        let r = verify_composition_identity("composition", &curve, &bundle, &f, &pairs, &pol(), 1e-8, 0).unwrap();
        assert!(!r.passed);
        assert_eq!(r.evaluation_failures(), 1);
        assert!(r.records[0].error.as_deref().unwrap().contains("theta divisor"));
    }

    #[test]
    fn torus_composition_small_batch() {
        let curve = CurveModel::torus(c(0.0, 1.0)).unwrap();
        let tau = curve.tau().unwrap().clone();
        let f = TestFunction::weierstrass_shifted(c(0.3, 0.0), &tau, &pol()).unwrap();
        let mut s = Sampler::new(1);
        let singular = singular_points(&f, &curve, &pol()).unwrap();
        let pairs: Vec<_> = (0..10)
            .map(|_| {
                let (x, y) = s.pair_avoiding(&curve, &singular, 1e-2);
                (PointOnCurve(x), PointOnCurve(y))
            })
            .collect();
        let bundle = DecomposableBundle::on_curve(&[c(0.37, 0.21), c(-0.2, 0.1)], &curve, &pol()).unwrap();
        let r = verify_composition_identity("composition", &curve, &bundle, &f, &pairs, &pol(), 1e-8, 1).unwrap();
        assert!(r.passed, "{}", r.max_rel_error);
    }

    #[test]
    fn report_invariant_and_failures() {
        let ok = InstanceRecord::compare(Vec::new(), &[c(1.0, 0.0)], &[c(1.0, 1e-9)]);
        let r = IdentityReport::from_records("t", 1e-9, 3, vec![ok.clone()]);
        assert!(r.passed && r.instances == 1);
        let bad = InstanceRecord::failed(Vec::new(), &Error::DiagonalPole);
        let r = IdentityReport::from_records("t", 1e-9, 3, vec![ok, bad]);
        assert!(!r.passed);
        assert_eq!(r.max_rel_error, FAILED_INSTANCE_ERROR);
    }

    #[test]
    fn census_report_is_exact() {
        let r = verify_characteristic_census(&[1, 2, 3], 0);
        assert!(r.passed);
        assert_eq!(r.max_abs_error, 0.0);
    }

    #[test]
    fn frozen_offsets_match_termwise_value() {
        for (t, v) in FROZEN_OFFSETS {
            let tau = RiemannMatrix::genus_one(t).unwrap();
            let live = crate::expansions::extended_connection_offset(&tau, &pol()).unwrap();
            assert!((live - v).norm() < 1e-12, "{t}: {live} vs {v}");
        }
        assert!(frozen_offset(c(0.0, 1.0)).is_some());
        assert!(frozen_offset(c(0.0, 1.1)).is_none());
    }
}
