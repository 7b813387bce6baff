//! Laurent data of the Szegő kernel along the diagonal.
//!
//! For a bundle `z` on a torus, `s(x, x + u) = c_{-1}/u + c_0 + c_1 u + O(u^2)`
//! with `c_{-1} = 1`, `c_0 = d_z log theta(z)` and
//! `c_1 = theta''(z) / (2 theta(z)) - theta_1'''(0) / (6 theta_1'(0))`.
//! The coefficients are extracted by trapezoidal contour integration on a
//! small circle around the diagonal, which is spectrally accurate for
//! functions meromorphic in the disc.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{RiemannMatrix, TruncationPolicy};
use crate::curves::{
    injectivity_scale, riemann_characteristic, BundlePoint, CurveModel, DecomposableBundle, PointOnCurve,
};
use crate::error::{Error, Result};
use crate::kernels::{normalized_szego, szego_line, szego_matrix};
use crate::theta::{theta, theta1_jet, theta_dtau, theta_jet, ThetaRequest};

/// Step of the central difference used to cross-check `d_z log theta`.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Smallest `|theta'|` at a zero for it to count as simple.
pub const SIMPLE_ZERO_THRESHOLD: f64 = 1e-6;

/// Parameters of the discrete contour integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionOptions {
    pub ring_radius: f64,
    pub samples: usize,
    /// Largest relative change of any coefficient allowed when the number of
    /// samples is doubled.
    pub aliasing_tolerance: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self { ring_radius: 1e-2, samples: 64, aliasing_tolerance: 1e-10 }
    }
}

impl ExpansionOptions {
    fn validate(&self, curve: &CurveModel) -> Result<()> {
        if !(self.ring_radius > 0.0) || !self.ring_radius.is_finite() {
            return Err(Error::InvalidExpansion("ring radius must be positive".into()));
        }
        if self.samples < 8 {
            return Err(Error::InvalidExpansion("at least 8 contour samples are required".into()));
        }
        if let Some(tau) = curve.tau() {
            let scale = injectivity_scale(tau.scalar()?);
            if self.ring_radius >= 0.1 * scale {
                return Err(Error::InvalidExpansion(format!(
                    "ring radius {} is not below 0.1 x injectivity scale {scale}",
                    self.ring_radius
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients `c_{-1}, c_0, c_1` of the kernel at the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalExpansion {
    pub c_minus1: Complex64,
    pub c0: Complex64,
    pub c1: Complex64,
    pub base_point: PointOnCurve,
    pub bundle: BundlePoint,
    pub tau: Option<Complex64>,
}

/// Matrix coefficients for a decomposable bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExpansion {
    pub c_minus1: DMatrix<Complex64>,
    pub c0: DMatrix<Complex64>,
    pub c1: DMatrix<Complex64>,
}

/// `(1/N) sum_j g(u_j) u_j^{-k}` for `k = -1, 0, 1`, `u_j = r exp(2 pi i j / N)`,
/// applied entrywise to a vector-valued `g`.
fn contour_coefficients<F>(g: &F, ring_radius: f64, samples: usize) -> Result<[Vec<Complex64>; 3]>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    let values: Vec<(Complex64, Vec<Complex64>)> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let angle = 2.0 * PI * j as f64 / samples as f64;
            let u = Complex64::from_polar(ring_radius, angle);
            g(u).map(|v| (u, v))
        })
        .collect::<Result<_>>()?;
    let len = values.first().map_or(0, |(_, v)| v.len());
    let mut out = [
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
    ];
    for (u, v) in &values {
        let inv = u.inv();
        for (e, val) in v.iter().enumerate() {
            out[0][e] += val * u;
            out[1][e] += val;
            out[2][e] += val * inv;
        }
    }
    let n = samples as f64;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(out)
}

/// Contour coefficients with the doubling-based aliasing guard.
fn guarded_coefficients<F>(g: F, opts: &ExpansionOptions) -> Result<[Vec<Complex64>; 3]>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    let coarse = contour_coefficients(&g, opts.ring_radius, opts.samples)?;
    let fine = contour_coefficients(&g, opts.ring_radius, 2 * opts.samples)?;
    for (k, (a, b)) in coarse.iter().zip(&fine).enumerate() {
        for (x, y) in a.iter().zip(b) {
            let change = (x - y).norm();
            if change > opts.aliasing_tolerance * (1.0 + y.norm()) || !change.is_finite() {
                return Err(Error::AliasingDetected { order: k as i32 - 1, change });
            }
        }
    }
    Ok(coarse)
}

/// Laurent coefficients of an arbitrary scalar function `g(u)` at `u = 0`.
pub fn laurent_coefficients<F>(g: F, opts: &ExpansionOptions) -> Result<[Complex64; 3]>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !(opts.ring_radius > 0.0) || opts.samples < 8 {
        return Err(Error::InvalidExpansion("need a positive ring radius and at least 8 samples".into()));
    }
    let c = guarded_coefficients(|u| Ok(vec![g(u)?]), opts)?;
    Ok([c[0][0], c[1][0], c[2][0]])
}

/// Expansion of the Szegő kernel `s(x, x + u)` of the line bundle `bundle`.
pub fn diagonal_expansion(
    x: PointOnCurve,
    bundle: &BundlePoint,
    curve: &CurveModel,
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
) -> Result<DiagonalExpansion> {
    opts.validate(curve)?;
    if !bundle.off_theta_divisor() {
        // Surface the magnitude through the kernel's own error.
        szego_line(x, PointOnCurve(x.0 + opts.ring_radius), bundle, curve, policy)?;
    }
    let c = guarded_coefficients(
        |u| Ok(vec![szego_line(x, PointOnCurve(x.0 + u), bundle, curve, policy)?.value]),
        opts,
    )?;
    Ok(DiagonalExpansion {
        c_minus1: c[0][0],
        c0: c[1][0],
        c1: c[2][0],
        base_point: x,
        bundle: *bundle,
        tau: curve.tau().map(|t| t.entry(0, 0)),
    })
}

/// Expansion of the matrix kernel of a decomposable bundle.
pub fn diagonal_expansion_matrix(
    x: PointOnCurve,
    bundle: &DecomposableBundle,
    curve: &CurveModel,
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
) -> Result<MatrixExpansion> {
    opts.validate(curve)?;
    bundle.require_off_divisor(curve, policy)?;
    let n = bundle.rank();
    let c = guarded_coefficients(
        |u| {
            let m = szego_matrix(x, PointOnCurve(x.0 + u), bundle, curve, policy)?.values;
            Ok(m.iter().copied().collect())
        },
        opts,
    )?;
    let to_matrix = |v: &Vec<Complex64>| DMatrix::from_column_slice(n, n, v);
    Ok(MatrixExpansion { c_minus1: to_matrix(&c[0]), c0: to_matrix(&c[1]), c1: to_matrix(&c[2]) })
}

/// Laurent coefficients of the normalized kernel `theta(z + u) / E(x, x + u)`;
/// valid on the theta divisor, where the residue `c_{-1} = theta(z)` vanishes.
pub fn normalized_diagonal_expansion(
    x: PointOnCurve,
    bundle: &BundlePoint,
    curve: &CurveModel,
    policy: &TruncationPolicy,
    opts: &ExpansionOptions,
) -> Result<[Complex64; 3]> {
    opts.validate(curve)?;
    let c = guarded_coefficients(
        |u| Ok(vec![normalized_szego(x, PointOnCurve(x.0 + u), bundle, curve, policy)?.value]),
        opts,
    )?;
    Ok([c[0][0], c[1][0], c[2][0]])
}

fn require_off_divisor(bundle: &BundlePoint, value: Complex64) -> Result<()> {
    if !bundle.off_theta_divisor() {
        return Err(Error::OnThetaDivisor { component: 0, magnitude: value.norm() });
    }
    Ok(())
}

/// `d_z theta(z) / theta(z)` from the term-wise differentiated series.
pub fn dlog_theta_z(bundle: &BundlePoint, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    let jet = theta_jet(bundle.z(), tau, &riemann_characteristic(), policy)?;
    require_off_divisor(bundle, jet[0])?;
    Ok(jet[1] / jet[0])
}

/// Central-difference estimate of `d_z log theta(z)`.
pub fn dlog_theta_z_finite_difference(
    bundle: &BundlePoint,
    tau: &RiemannMatrix,
    policy: &TruncationPolicy,
    step: f64,
) -> Result<Complex64> {
    let th = |z: Complex64| theta(&ThetaRequest::new(&[z], tau).policy(*policy));
    let value = th(bundle.z())?;
    require_off_divisor(bundle, value)?;
    Ok((th(bundle.z() + step)? - th(bundle.z() - step)?) / (2.0 * step * value))
}

/// `d_tau theta(z, tau) / theta(z, tau)` in genus 1, term by term.
pub fn dlog_theta_tau(bundle: &BundlePoint, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    tau.scalar()?;
    let value = theta(&ThetaRequest::new(&[bundle.z()], tau).policy(*policy))?;
    require_off_divisor(bundle, value)?;
    Ok(theta_dtau(bundle.z(), tau, &riemann_characteristic(), policy)? / value)
}

/// The `z`-independent part of `c_1 - 2 pi i d_tau log theta`, namely
/// `-theta_1'''(0) / (6 theta_1'(0))`.
pub fn extended_connection_offset(tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    let jet = theta1_jet(Complex64::new(0.0, 0.0), tau, policy)?;
    Ok(-jet[3] / (6.0 * jet[1]))
}

/// Newton iteration for a zero of Riemann's genus-1 theta function.
pub fn find_theta_zero(guess: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    const MAX_ITERATIONS: usize = 50;
    let ch = riemann_characteristic();
    let mut z = guess;
    for _ in 0..MAX_ITERATIONS {
        let jet = theta_jet(z, tau, &ch, policy)?;
        if jet[1].norm() < SIMPLE_ZERO_THRESHOLD {
            return Err(Error::ZeroNotSimple { derivative: jet[1].norm() });
        }
        let step = jet[0] / jet[1];
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            let jet = theta_jet(z, tau, &ch, policy)?;
            let step = jet[0] / jet[1];
            if step.norm() <= 1e-12 {
                return Ok(z);
            }
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS })
}

/// A straight path `z(t) = z* + t d` through a zero `z*` of theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorCrossing {
    /// Starting point for locating `z*`.
    pub zero_guess: Complex64,
    /// Direction of the path; normalized before use.
    pub direction: Complex64,
    /// Largest `|t|` sampled by the scan.
    pub initial_step: f64,
    /// Point of the curve at which the diagonal expansion is taken.
    pub base_point: PointOnCurve,
}

impl DivisorCrossing {
    pub fn through_standard_zero(tau: Complex64) -> Self {
        Self {
            zero_guess: crate::curves::theta_zero_guess(tau),
            direction: Complex64::new(1.0, 0.0),
            initial_step: 1e-2,
            base_point: PointOnCurve(Complex64::new(0.1, 0.05)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub t: f64,
    pub z: Complex64,
    /// `(z - z*) c_0(z)`.
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleScan {
    pub zero: Complex64,
    pub theta_prime_at_zero: Complex64,
    pub residue_estimate: Complex64,
    pub samples: Vec<ScanSample>,
}

/// Scans `(z - z*) c_0(z)` along a path through a simple theta zero.
///
/// The path is sampled at `t = +-initial_step / 2^k` for `k < steps`; the
/// estimate is the mean of the two innermost samples, which cancels the
/// first-order term of `c_0 = 1/(z - z*) + O(1)`.
pub fn log_pole_scan(
    path: &DivisorCrossing,
    tau: &RiemannMatrix,
    policy: &TruncationPolicy,
    steps: usize,
    opts: &ExpansionOptions,
) -> Result<PoleScan> {
    if steps == 0 || !(path.initial_step > 0.0) || path.direction.norm() == 0.0 {
        return Err(Error::InvalidExpansion("scan needs steps >= 1, a positive step and a direction".into()));
    }
    let zero = find_theta_zero(path.zero_guess, tau, policy)?;
    let jet = theta_jet(zero, tau, &riemann_characteristic(), policy)?;
    if jet[1].norm() < SIMPLE_ZERO_THRESHOLD {
        return Err(Error::ZeroNotSimple { derivative: jet[1].norm() });
    }
    let curve = CurveModel::from_matrix(tau.clone())?;
    let dir = path.direction / path.direction.norm();
    let ts: Vec<f64> = (0..steps)
        .flat_map(|k| {
            let t = path.initial_step / f64::from(1u32 << k.min(31));
            [-t, t]
        })
        .collect();
    let samples = ts
        .par_iter()
        .map(|&t| {
            let z = zero + t * dir;
            let bundle = BundlePoint::on_torus(z, tau, policy)?;
            let e = diagonal_expansion(path.base_point, &bundle, &curve, policy, opts)?;
            Ok(ScanSample { t, z, value: (z - zero) * e.c0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len();
    let residue_estimate = 0.5 * (samples[n - 2].value + samples[n - 1].value);
    Ok(PoleScan { zero, theta_prime_at_zero: jet[1], residue_estimate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::theta_zero_guess;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    fn setup(t: Complex64, z: Complex64) -> (CurveModel, RiemannMatrix, BundlePoint) {
        let tau = RiemannMatrix::genus_one(t).unwrap();
        let bundle = BundlePoint::on_torus(z, &tau, &pol()).unwrap();
        (CurveModel::Torus(tau.clone()), tau, bundle)
    }

    // Frozen with mpmath (40 digits) at tau = i, z = 0.37 + 0.21i.
    const C0_FIXTURE: Complex64 = Complex64::new(-0.975_407_387_907_480_2, 0.611_602_550_782_950_4);
    const C1_FIXTURE: Complex64 = Complex64::new(3.887_460_397_793_860_6, 2.734_123_356_056_574_3);
    const DTAU_FIXTURE: Complex64 = Complex64::new(0.435_149_247_139_405_98, -0.368_708_538_382_878_7);

    #[test]
    fn expansion_at_reference_point() {
        let (curve, _, bundle) = setup(c(0.0, 1.0), c(0.37, 0.21));
        let e = diagonal_expansion(PointOnCurve(c(0.1, 0.0)), &bundle, &curve, &pol(), &ExpansionOptions::default())
            .unwrap();
        assert!((e.c_minus1 - 1.0).norm() < 1e-10);
        assert!((e.c0 - C0_FIXTURE).norm() < 1e-8);
        assert!((e.c1 - C1_FIXTURE).norm() < 1e-7);
    }

    #[test]
    fn dlog_fixtures_and_finite_difference() {
        let (_, tau, bundle) = setup(c(0.0, 1.0), c(0.37, 0.21));
        let d = dlog_theta_z(&bundle, &tau, &pol()).unwrap();
        assert!((d - C0_FIXTURE).norm() < 1e-12);
        let fd = dlog_theta_z_finite_difference(&bundle, &tau, &pol(), FINITE_DIFFERENCE_STEP).unwrap();
        assert!((d - fd).norm() < 1e-6);
        let dt = dlog_theta_tau(&bundle, &tau, &pol()).unwrap();
        assert!((dt - DTAU_FIXTURE).norm() < 1e-12);
    }

    #[test]
    fn dlog_vanishes_at_origin() {
        let (_, tau, bundle) = setup(c(0.2, 1.3), c(0.0, 0.0));
        assert!(dlog_theta_z(&bundle, &tau, &pol()).unwrap().norm() < 1e-15);
    }

    #[test]
    fn offset_at_i_is_half_pi() {
        let tau = RiemannMatrix::genus_one(c(0.0, 1.0)).unwrap();
        let off = extended_connection_offset(&tau, &pol()).unwrap();
        assert!((off - c(PI / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sphere_expansion_is_pure_pole() {
        let e = diagonal_expansion(
            PointOnCurve(c(0.7, -0.2)),
            &BundlePoint::trivial(),
            &CurveModel::Sphere,
            &pol(),
            &ExpansionOptions::default(),
        )
        .unwrap();
        assert!((e.c_minus1 - 1.0).norm() < 1e-14);
        assert!(e.c0.norm() < 1e-12 && e.c1.norm() < 1e-10);
    }

    #[test]
    fn rejects_large_ring_and_aliasing() {
        let (curve, _, bundle) = setup(c(0.0, 1.0), c(0.37, 0.21));
        let x = PointOnCurve(c(0.1, 0.0));
        let big = ExpansionOptions { ring_radius: 0.2, ..Default::default() };
        assert!(matches!(
            diagonal_expansion(x, &bundle, &curve, &pol(), &big),
            Err(Error::InvalidExpansion(_))
        ));
        let coarse = ExpansionOptions { ring_radius: 0.09, samples: 8, aliasing_tolerance: 1e-10 };
        assert!(matches!(
            diagonal_expansion(x, &bundle, &curve, &pol(), &coarse),
            Err(Error::AliasingDetected { .. })
        ));
    }

    #[test]
    fn on_divisor_errors() {
        let t = c(0.0, 1.0);
        let (curve, tau, bundle) = setup(t, theta_zero_guess(t));
        let x = PointOnCurve(c(0.1, 0.0));
        let opts = ExpansionOptions::default();
        assert!(matches!(
            diagonal_expansion(x, &bundle, &curve, &pol(), &opts),
            Err(Error::OnThetaDivisor { .. })
        ));
        assert!(matches!(dlog_theta_z(&bundle, &tau, &pol()), Err(Error::OnThetaDivisor { .. })));
        assert!(matches!(dlog_theta_tau(&bundle, &tau, &pol()), Err(Error::OnThetaDivisor { .. })));
        let n = normalized_diagonal_expansion(x, &bundle, &curve, &pol(), &opts).unwrap();
        assert!(n[0].norm() < 1e-7);
    }

    #[test]
    fn matrix_expansion_is_diagonal() {
        let t = c(0.5, 1.0);
        let tau = RiemannMatrix::genus_one(t).unwrap();
        let curve = CurveModel::Torus(tau.clone());
        let zs = [c(0.1, 0.2), c(-0.3, 0.1), c(0.2, -0.25)];
        let e = DecomposableBundle::on_curve(&zs, &curve, &pol()).unwrap();
        let m = diagonal_expansion_matrix(PointOnCurve(c(0.2, 0.3)), &e, &curve, &pol(), &ExpansionOptions::default())
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((m.c_minus1[(i, j)] - id).norm() < 1e-8);
            }
            let d = dlog_theta_z(&e.points()[i], &tau, &pol()).unwrap();
            assert!((m.c0[(i, i)] - d).norm() < 1e-7);
        }
    }

    #[test]
    fn theta_zero_and_scan() {
        let t = c(0.3, 1.1);
        let tau = RiemannMatrix::genus_one(t).unwrap();
        let z = find_theta_zero(theta_zero_guess(t) + c(0.05, -0.03), &tau, &pol()).unwrap();
        assert!((z - theta_zero_guess(t)).norm() < 1e-12);
        let scan = log_pole_scan(&DivisorCrossing::through_standard_zero(t), &tau, &pol(), 8, &ExpansionOptions::default())
            .unwrap();
        assert_eq!(scan.samples.len(), 16);
        assert!((scan.residue_estimate - 1.0).norm() < 1e-6);
    }

    #[test]
    fn laurent_of_known_function() {
        // 1/sin(u) = 1/u + u/6 + ...
        let c = laurent_coefficients(|u| Ok(u.sin().inv()), &ExpansionOptions::default()).unwrap();
        assert!((c[0] - 1.0).norm() < 1e-13);
        assert!(c[1].norm() < 1e-13);
        assert!((c[2] - 1.0 / 6.0).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn coefficients_independent_of_base_point(xr in 0.0f64..1.0, xi in 0.0f64..1.0) {
            let (curve, _, bundle) = setup(c(0.0, 1.0), c(0.37, 0.21));
            let opts = ExpansionOptions::default();
            let a = diagonal_expansion(PointOnCurve(c(0.1, 0.0)), &bundle, &curve, &pol(), &opts).unwrap();
            let b = diagonal_expansion(PointOnCurve(c(xr, xi)), &bundle, &curve, &pol(), &opts).unwrap();
            prop_assert!((a.c0 - b.c0).norm() < 1e-8);
            prop_assert!((a.c1 - b.c1).norm() < 1e-7);
        }
    }
}
