//! Point evaluations behind `szego eval`.

use num_complex::Complex64;
use serde::Serialize;
use szego_core::algebra::{validate_riemann_matrix, RiemannMatrix, ThetaCharacteristic};
use szego_core::curves::{BundlePoint, CurveModel, DecomposableBundle, PointOnCurve};
use szego_core::expansions::diagonal_expansion;
use szego_core::identities::JsonComplex;
use szego_core::kernels::{prime_form, szego_matrix};
use szego_core::theta::{theta, ThetaRequest};

use crate::spec::{CurveKind, Policy};
use crate::CliError;

/// Parses `re,im` (a bare `re` means a real number).
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("invalid number {p:?} in {s:?}"));
    let v = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected re,im but got {s:?}")),
    };
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(format!("non-finite value {s:?}"));
    }
    Ok(v)
}

/// Parses a `;`-separated list of complex numbers.
pub fn parse_complex_list(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(';').map(parse_complex).collect()
}

/// Parses a `,`-separated list of reals.
pub fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| format!("invalid number {p:?}"))).collect()
}

/// A Riemann matrix from its `g^2` entries in row-major order.
pub fn riemann_matrix(entries: &[Complex64]) -> Result<RiemannMatrix, CliError> {
    let g = (entries.len() as f64).sqrt().round() as usize;
    if g == 0 || g * g != entries.len() {
        return Err(CliError::Spec(format!("tau needs g^2 entries, got {}", entries.len())));
    }
    let rows: Vec<Vec<Complex64>> = entries.chunks(g).map(<[Complex64]>::to_vec).collect();
    validate_riemann_matrix(&rows).map_err(|e| CliError::Spec(format!("tau: {e}")))
}

pub fn curve(kind: CurveKind, tau: Option<&[Complex64]>) -> Result<CurveModel, CliError> {
    match (kind, tau) {
        (CurveKind::Sphere, None) => Ok(CurveModel::Sphere),
        (CurveKind::Sphere, Some(_)) => Err(CliError::Spec("a sphere takes no --tau".into())),
        (CurveKind::Torus, Some(t)) => {
            let m = riemann_matrix(t)?;
            if m.genus() != 1 {
                return Err(CliError::Spec("a torus needs a single tau entry".into()));
            }
            Ok(CurveModel::from_matrix(m)?)
        }
        (CurveKind::Torus, None) => Err(CliError::Spec("a torus needs --tau".into())),
    }
}

fn bundle(zs: &[Complex64], curve: &CurveModel, policy: &Policy) -> Result<DecomposableBundle, CliError> {
    let zs = if zs.is_empty() { vec![Complex64::new(0.0, 0.0)] } else { zs.to_vec() };
    DecomposableBundle::on_curve(&zs, curve, &policy.truncation).map_err(|e| CliError::Spec(format!("bundle: {e}")))
}

#[derive(Debug, Clone, Default)]
pub struct ThetaArgs {
    pub tau: Vec<Complex64>,
    pub z: Vec<Complex64>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub dz: Option<Vec<usize>>,
    pub dtau: Option<(usize, usize)>,
}

pub fn eval_theta(args: &ThetaArgs, policy: &Policy) -> Result<Complex64, CliError> {
    let tau = riemann_matrix(&args.tau)?;
    let g = tau.genus();
    let zero = vec![0.0; g];
    let ch = ThetaCharacteristic::from_values(
        args.a.as_deref().unwrap_or(&zero),
        args.b.as_deref().unwrap_or(&zero),
    )
    .map_err(|e| CliError::Spec(format!("characteristic: {e}")))?;
    if ch.genus() != g || args.z.len() != g {
        return Err(CliError::Spec(format!("genus {g} needs {g} z entries and characteristic entries")));
    }
    let mut req = ThetaRequest::new(&args.z, &tau).characteristic(&ch).policy(policy.truncation);
    if let Some(d) = &args.dz {
        req = req.deriv_z(d);
    }
    if let Some((j, k)) = args.dtau {
        req = req.deriv_tau(j, k);
    }
    theta(&req).map_err(|e| match e {
        szego_core::Error::UnsupportedDerivative(_) | szego_core::Error::DimensionMismatch { .. } => {
            CliError::Spec(e.to_string())
        }
        other => CliError::Eval(other),
    })
}

pub fn eval_prime_form(curve: &CurveModel, x: Complex64, y: Complex64, policy: &Policy) -> Result<Complex64, CliError> {
    Ok(prime_form(PointOnCurve(x), PointOnCurve(y), curve, &policy.truncation)?)
}

/// Diagonal entries of the Szegő kernel of the bundle with components `zs`
/// (the trivial bundle when `zs` is empty).
pub fn eval_szego(
    curve: &CurveModel,
    zs: &[Complex64],
    x: Complex64,
    y: Complex64,
    policy: &Policy,
) -> Result<Vec<Complex64>, CliError> {
    let b = bundle(zs, curve, policy)?;
    let m = szego_matrix(PointOnCurve(x), PointOnCurve(y), &b, curve, &policy.truncation)?;
    Ok((0..b.rank()).map(|i| m.values[(i, i)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionOutput {
    pub c_minus1: JsonComplex,
    pub c0: JsonComplex,
    pub c1: JsonComplex,
}

pub fn eval_expansion(
    curve: &CurveModel,
    z: Option<Complex64>,
    x: Complex64,
    policy: &Policy,
) -> Result<ExpansionOutput, CliError> {
    let z = z.unwrap_or_default();
    let b = BundlePoint::on_curve(z, curve, &policy.truncation).map_err(|e| CliError::Spec(format!("bundle: {e}")))?;
    let e = diagonal_expansion(PointOnCurve(x), &b, curve, &policy.truncation, &policy.expansion)?;
    Ok(ExpansionOutput { c_minus1: e.c_minus1.into(), c0: e.c0.into(), c1: e.c1.into() })
}
