//! Prime forms and Szegő kernels.
//!
//! Values are reported in the coordinate trivialization: `dz` for the
//! canonical bundle, one fixed global branch of `sqrt(dz)` for half-forms,
//! and the symmetric section `mu_1` for the diagonal twist. In this
//! trivialization the kernel of the bundle `z` at `(x, y)` is
//!
//! ```text
//! s(x, y) = theta(z + y - x) / (theta(z) E(x, y)),   E(x, y) = theta_1(y - x) / theta_1'(0)
//! ```
//!
//! on a torus, and `1 / (y - x)` for the half-canonical bundle on the sphere.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::TruncationPolicy;
use crate::curves::{BundlePoint, CurveModel, DecomposableBundle, PointOnCurve, DIVISOR_EPSILON};
use crate::error::{Error, Result};
use crate::theta::{theta, theta1, theta1_prime_zero, ThetaRequest};

/// Scalar kernel value in the coordinate trivialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
}

/// Matrix-valued kernel for a rank-`n` bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixKernelValue {
    pub values: DMatrix<Complex64>,
}

/// Klein prime form: `y - x` on the sphere, `theta_1(y - x) / theta_1'(0)`
/// on a torus.
pub fn prime_form(x: PointOnCurve, y: PointOnCurve, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Complex64> {
    match curve {
        CurveModel::Sphere => Ok(y.0 - x.0),
        CurveModel::Torus(tau) => {
            let d = y.0 - x.0;
            if d == Complex64::new(0.0, 0.0) {
                return Ok(d);
            }
            Ok(theta1(d, tau, policy)? / theta1_prime_zero(tau, policy)?)
        }
    }
}

fn riemann_theta(z: Complex64, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Complex64> {
    match curve {
        CurveModel::Sphere => Ok(Complex64::new(1.0, 0.0)),
        CurveModel::Torus(tau) => theta(&ThetaRequest::new(&[z], tau).policy(*policy)),
    }
}

fn check_bundle(bundle: &BundlePoint, curve: &CurveModel) -> Result<()> {
    if curve.is_sphere() && bundle.z() != Complex64::new(0.0, 0.0) {
        return Err(Error::NontrivialBundleOnSphere { re: bundle.z().re, im: bundle.z().im });
    }
    Ok(())
}

fn off_diagonal_prime_form(
    x: PointOnCurve,
    y: PointOnCurve,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let e = prime_form(x, y, curve, policy)?;
    if e.norm() <= DIVISOR_EPSILON {
        return Err(Error::DiagonalPole);
    }
    Ok(e)
}

/// Szegő kernel of a line bundle off the theta divisor.
pub fn szego_line(
    x: PointOnCurve,
    y: PointOnCurve,
    bundle: &BundlePoint,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<KernelValue> {
    check_bundle(bundle, curve)?;
    if !bundle.off_theta_divisor() {
        let magnitude = riemann_theta(bundle.z(), curve, policy)?.norm();
        return Err(Error::OnThetaDivisor { component: 0, magnitude });
    }
    let e = off_diagonal_prime_form(x, y, curve, policy)?;
    let num = riemann_theta(bundle.z() + (y.0 - x.0), curve, policy)?;
    let den = riemann_theta(bundle.z(), curve, policy)?;
    Ok(KernelValue { value: num / (den * e) })
}

/// Szegő kernel of a decomposable bundle: the diagonal matrix of the line
/// bundle kernels.
pub fn szego_matrix(
    x: PointOnCurve,
    y: PointOnCurve,
    bundle: &DecomposableBundle,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<MatrixKernelValue> {
    bundle.require_off_divisor(curve, policy)?;
    let n = bundle.rank();
    let mut values = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, p) in bundle.points().iter().enumerate() {
        values[(i, i)] = szego_line(x, y, p, curve, policy)?.value;
    }
    Ok(MatrixKernelValue { values })
}

/// Normalized kernel `theta(z + y - x) / E(x, y)`, defined for every bundle
/// including those on the theta divisor.
pub fn normalized_szego(
    x: PointOnCurve,
    y: PointOnCurve,
    bundle: &BundlePoint,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<KernelValue> {
    check_bundle(bundle, curve)?;
    let e = off_diagonal_prime_form(x, y, curve, policy)?;
    let num = riemann_theta(bundle.z() + (y.0 - x.0), curve, policy)?;
    Ok(KernelValue { value: num / e })
}

/// Both sides of `det s_E = delta_E^* theta / theta(E)` for a decomposable
/// bundle: `lhs` is the determinant of the matrix kernel, `rhs` is
/// `prod theta(z_i + y - x) / (prod theta(z_i) * E(x, y)^n)`.
pub fn det_szego_vs_theta_pullback(
    x: PointOnCurve,
    y: PointOnCurve,
    bundle: &DecomposableBundle,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<(Complex64, Complex64)> {
    let lhs = szego_matrix(x, y, bundle, curve, policy)?.values.determinant();
    let e = off_diagonal_prime_form(x, y, curve, policy)?;
    let mut pullback = Complex64::new(1.0, 0.0);
    let mut theta_at_bundle = Complex64::new(1.0, 0.0);
    for p in bundle.points() {
        pullback *= riemann_theta(p.z() + (y.0 - x.0), curve, policy)?;
        theta_at_bundle *= riemann_theta(p.z(), curve, policy)?;
    }
    let rhs = pullback / (theta_at_bundle * e.powu(bundle.rank() as u32));
    Ok((lhs, rhs))
}
