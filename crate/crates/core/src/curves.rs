//! Curve and bundle models: the Riemann sphere and complex tori, degree-zero
//! line bundles on the torus, decomposable higher-rank bundles, and the
//! meromorphic test functions used by the composition identity.

use num_complex::Complex64;

use crate::algebra::{RiemannMatrix, ThetaCharacteristic, TruncationPolicy};
use crate::error::{Error, Result};
use crate::theta::{theta, theta1, theta1_jet, ThetaRequest};

/// Threshold for "on the theta divisor" / "on a lattice point" decisions.
pub const DIVISOR_EPSILON: f64 = 1e-8;

/// Relative residual allowed when checking that a returned zero of a test
/// function really is a zero.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum CurveModel {
    /// `CP^1` in its affine chart; the point at infinity is never evaluated.
    Sphere,
    /// `C / (Z + tau Z)`.
    Torus(RiemannMatrix),
}

impl CurveModel {
    pub fn torus(tau: Complex64) -> Result<Self> {
        Ok(Self::Torus(RiemannMatrix::genus_one(tau)?))
    }

    pub fn from_matrix(tau: RiemannMatrix) -> Result<Self> {
        tau.scalar()?;
        Ok(Self::Torus(tau))
    }

    pub fn tau(&self) -> Option<&RiemannMatrix> {
        match self {
            Self::Sphere => None,
            Self::Torus(t) => Some(t),
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Self::Sphere)
    }
}

/// A point given by its coordinate: affine on the sphere, or a
/// representative in `C` of a torus point. Never reduced modulo the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOnCurve(pub Complex64);

impl PointOnCurve {
    pub fn new(coord: Complex64) -> Result<Self> {
        if !coord.re.is_finite() || !coord.im.is_finite() {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(Self(coord))
    }

    pub fn coord(&self) -> Complex64 {
        self.0
    }
}

impl From<Complex64> for PointOnCurve {
    fn from(c: Complex64) -> Self {
        Self(c)
    }
}

/// A degree-zero line bundle on the torus, identified with the argument of
/// Riemann's theta function. Its theta divisor is `{theta(z) = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundlePoint {
    z: Complex64,
    off_theta_divisor: bool,
}

impl BundlePoint {
    /// Classifies `z` against the theta divisor of `tau`.
    pub fn on_torus(z: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Self> {
        tau.scalar()?;
        let value = theta(&ThetaRequest::new(&[z], tau).policy(*policy))?;
        Ok(Self { z, off_theta_divisor: value.norm() > DIVISOR_EPSILON })
    }

    /// Classifies `z` against whatever divisor the curve has; the sphere
    /// only carries the trivial bundle `z = 0`.
    pub fn on_curve(z: Complex64, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Self> {
        match curve {
            CurveModel::Sphere if z == Complex64::new(0.0, 0.0) => Ok(Self::trivial()),
            CurveModel::Sphere => Err(Error::NontrivialBundleOnSphere { re: z.re, im: z.im }),
            CurveModel::Torus(tau) => Self::on_torus(z, tau, policy),
        }
    }

    /// The trivial bundle on the sphere, which has no sections.
    pub fn trivial() -> Self {
        Self { z: Complex64::new(0.0, 0.0), off_theta_divisor: true }
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn off_theta_divisor(&self) -> bool {
        self.off_theta_divisor
    }
}

/// `E = L_1 + ... + L_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposableBundle {
    points: Vec<BundlePoint>,
}

impl DecomposableBundle {
    pub fn new(points: Vec<BundlePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(Self { points })
    }

    pub fn on_curve(zs: &[Complex64], curve: &CurveModel, policy: &TruncationPolicy) -> Result<Self> {
        Self::new(
            zs.iter()
                .map(|&z| BundlePoint::on_curve(z, curve, policy))
                .collect::<Result<_>>()?,
        )
    }

    pub fn rank(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[BundlePoint] {
        &self.points
    }

    /// First component lying on the theta divisor, if any.
    pub fn require_off_divisor(&self, curve: &CurveModel, policy: &TruncationPolicy) -> Result<()> {
        for (component, p) in self.points.iter().enumerate() {
            if !p.off_theta_divisor {
                let magnitude = match curve.tau() {
                    Some(t) => theta(&ThetaRequest::new(&[p.z], t).policy(*policy))?.norm(),
                    None => 0.0,
                };
                return Err(Error::OnThetaDivisor { component, magnitude });
            }
        }
        Ok(())
    }
}

/// Nonconstant meromorphic function whose zero fiber is used in the
/// composition identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `f(zeta) = zeta` on the sphere.
    SphereCoordinate,
    /// `f(u) = p_rel(u) - p_rel(a)` on a torus, with zeros `a` and `-a`.
    WeierstrassShifted { a: PointOnCurve },
}

impl TestFunction {
    /// Builds the shifted Weierstrass function, rejecting 2-torsion `a`
    /// (where the two zeros collide).
    pub fn weierstrass_shifted(a: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Self> {
        let a = PointOnCurve::new(a)?;
        let t = theta1(2.0 * a.0, tau, policy)?;
        if t.norm() <= DIVISOR_EPSILON {
            return Err(Error::DegenerateFiber(format!(
                "a = {} is a 2-torsion point; zeros a and -a collide",
                a.0
            )));
        }
        Ok(Self::WeierstrassShifted { a })
    }

    pub fn value(&self, u: Complex64, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Complex64> {
        match (self, curve) {
            (Self::SphereCoordinate, CurveModel::Sphere) => Ok(u),
            (Self::WeierstrassShifted { a }, CurveModel::Torus(tau)) => {
                Ok(weierstrass_p_rel(u, tau, policy)? - weierstrass_p_rel(a.0, tau, policy)?)
            }
            _ => Err(Error::CurveMismatch),
        }
    }

    /// `df/du` in the coordinate `u`.
    pub fn derivative(&self, u: Complex64, curve: &CurveModel, policy: &TruncationPolicy) -> Result<Complex64> {
        match (self, curve) {
            (Self::SphereCoordinate, CurveModel::Sphere) => Ok(Complex64::new(1.0, 0.0)),
            (Self::WeierstrassShifted { .. }, CurveModel::Torus(tau)) => {
                weierstrass_p_prime_rel(u, tau, policy)
            }
            _ => Err(Error::CurveMismatch),
        }
    }

    /// Points where the function has a pole, as representatives in `C`.
    pub fn poles(&self) -> Vec<Complex64> {
        match self {
            Self::SphereCoordinate => Vec::new(),
            Self::WeierstrassShifted { .. } => vec![Complex64::new(0.0, 0.0)],
        }
    }
}

fn log_theta1_derivatives(u: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<[Complex64; 3]> {
    let [t0, t1, t2, t3] = theta1_jet(u, tau, policy)?;
    if t0.norm() <= DIVISOR_EPSILON {
        return Err(Error::PoleAtLatticePoint { re: u.re, im: u.im });
    }
    let l1 = t1 / t0;
    let r2 = t2 / t0;
    let r3 = t3 / t0;
    let l2 = r2 - l1 * l1;
    let l3 = r3 - 3.0 * r2 * l1 + 2.0 * l1 * l1 * l1;
    Ok([l1, l2, l3])
}

/// `-d^2/du^2 log theta_1(u, tau)`: Weierstrass `p` up to a `u`-independent
/// constant.
pub fn weierstrass_p_rel(u: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    Ok(-log_theta1_derivatives(u, tau, policy)?[1])
}

/// `-d^3/du^3 log theta_1(u, tau)`, equal to `p'(u)`.
pub fn weierstrass_p_prime_rel(u: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    Ok(-log_theta1_derivatives(u, tau, policy)?[2])
}

/// The zero fiber `f^{-1}(0)` with the derivative `df` at each zero.
pub fn zeros_and_df(
    f: &TestFunction,
    curve: &CurveModel,
    policy: &TruncationPolicy,
) -> Result<Vec<(PointOnCurve, Complex64)>> {
    let zeros = match (f, curve) {
        (TestFunction::SphereCoordinate, CurveModel::Sphere) => {
            vec![(PointOnCurve(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0))]
        }
        (TestFunction::WeierstrassShifted { a }, CurveModel::Torus(tau)) => {
            if theta1(2.0 * a.0, tau, policy)?.norm() <= DIVISOR_EPSILON {
                return Err(Error::DegenerateFiber(format!("zeros {} and {} collide", a.0, -a.0)));
            }
            let dp = weierstrass_p_prime_rel(a.0, tau, policy)?;
            vec![(*a, dp), (PointOnCurve(-a.0), -dp)]
        }
        _ => return Err(Error::CurveMismatch),
    };
    let scale = match f {
        TestFunction::SphereCoordinate => 1.0,
        TestFunction::WeierstrassShifted { a } => {
            1.0 + weierstrass_p_rel(a.0, curve.tau().ok_or(Error::CurveMismatch)?, policy)?.norm()
        }
    };
    for (alpha, df) in &zeros {
        let residual = f.value(alpha.0, curve, policy)?.norm();
        if residual >= RESIDUAL_TOLERANCE * scale {
            return Err(Error::DegenerateFiber(format!("|f({})| = {residual:e} is not a zero", alpha.0)));
        }
        if df.norm() <= DIVISOR_EPSILON {
            return Err(Error::DegenerateFiber(format!("df vanishes at {}", alpha.0)));
        }
    }
    Ok(zeros)
}

/// Distance from `w` to the lattice `Z + tau Z`.
pub fn lattice_distance(w: Complex64, tau: Complex64) -> f64 {
    // Reduce along tau first, then along 1, and search the neighbouring cells.
    let n = (w.im / tau.im).round();
    let w1 = w - n * tau;
    let m = w1.re.round();
    let w2 = w1 - m;
    let mut best = f64::INFINITY;
    for dn in -2..=2 {
        for dm in -2..=2 {
            best = best.min((w2 - f64::from(dm) - f64::from(dn) * tau).norm());
        }
    }
    best
}

/// Length of the shortest nonzero vector of `Z + tau Z`.
pub fn injectivity_scale(tau: Complex64) -> f64 {
    let mut best = f64::INFINITY;
    let n_max = (1.0 / tau.im).ceil() as i64 + 2;
    for n in -n_max..=n_max {
        let m0 = -(n as f64 * tau.re).round() as i64;
        for m in (m0 - 2)..=(m0 + 2) {
            if n == 0 && m == 0 {
                continue;
            }
            best = best.min((m as f64 + n as f64 * tau).norm());
        }
    }
    best
}

/// The zero `1/2 + tau/2` of Riemann's genus-1 theta function, as a
/// starting point for root finding.
pub fn theta_zero_guess(tau: Complex64) -> Complex64 {
    0.5 + 0.5 * tau
}

/// Characteristic `[0, 0]` in genus 1.
pub(crate) fn riemann_characteristic() -> ThetaCharacteristic {
    ThetaCharacteristic::zero(1)
}
