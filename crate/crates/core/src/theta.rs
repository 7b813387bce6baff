//! Riemann theta functions with half-integer characteristics.
//!
//! Series convention:
//!
//! ```text
//! theta[a,b](z, tau) = sum_{n in Z^g} exp(pi i (n+a)^T tau (n+a) + 2 pi i (n+a)^T (z+b))
//! ```
//!
//! With this normalization the genus-1 heat equation reads
//! `d^2 theta / dz^2 = 4 pi i d theta / d tau`.
//!
//! Derivatives are taken term by term. The lattice box is centred on the
//! largest term and its radius comes from a closed-form Gaussian tail bound
//! driven by the smallest eigenvalue of `Im(tau)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::algebra::{RiemannMatrix, ThetaCharacteristic, TruncationPolicy};
use crate::error::{Error, Result};

/// Highest total `z`-derivative order supported by the engine.
pub const MAX_Z_DERIVATIVE: usize = 3;

/// Tail target used by the fixed high-precision oracle mode.
pub const ORACLE_TOLERANCE: f64 = 1e-30;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One theta evaluation: argument, modulus, characteristic, optional
/// derivatives and truncation policy.
#[derive(Debug, Clone)]
pub struct ThetaRequest<'a> {
    z: Vec<Complex64>,
    tau: &'a RiemannMatrix,
    characteristic: ThetaCharacteristic,
    deriv_z: Vec<usize>,
    deriv_tau: Option<(usize, usize)>,
    policy: TruncationPolicy,
}

impl<'a> ThetaRequest<'a> {
    pub fn new(z: &[Complex64], tau: &'a RiemannMatrix) -> Self {
        Self {
            z: z.to_vec(),
            tau,
            characteristic: ThetaCharacteristic::zero(tau.genus()),
            deriv_z: vec![0; tau.genus()],
            deriv_tau: None,
            policy: TruncationPolicy::default(),
        }
    }

    pub fn characteristic(mut self, ch: &ThetaCharacteristic) -> Self {
        self.characteristic = ch.clone();
        self
    }

    /// Derivative orders per coordinate, e.g. `[2, 1]` is `d^3 / dz_1^2 dz_2`.
    pub fn deriv_z(mut self, orders: &[usize]) -> Self {
        self.deriv_z = orders.to_vec();
        self
    }

    /// Derivative along the symmetric entry `tau_jk = tau_kj`.
    ///
    /// For `j != k` both entries move together, so the term factor is
    /// `2 pi i v_j v_k`; for `j == k` it is `pi i v_j^2`.
    pub fn deriv_tau(mut self, j: usize, k: usize) -> Self {
        self.deriv_tau = Some((j.min(k), j.max(k)));
        self
    }

    pub fn policy(mut self, policy: TruncationPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn validate(&self) -> Result<()> {
        let g = self.tau.genus();
        if self.z.len() != g {
            return Err(Error::DimensionMismatch { expected: g, got: self.z.len() });
        }
        if self.characteristic.genus() != g {
            return Err(Error::DimensionMismatch { expected: g, got: self.characteristic.genus() });
        }
        if self.deriv_z.len() != g {
            return Err(Error::DimensionMismatch { expected: g, got: self.deriv_z.len() });
        }
        if self.deriv_z.iter().sum::<usize>() > MAX_Z_DERIVATIVE {
            return Err(Error::UnsupportedDerivative("total z-derivative order above 3"));
        }
        if let Some((_, k)) = self.deriv_tau {
            if k >= g {
                return Err(Error::UnsupportedDerivative("tau index out of range"));
            }
        }
        if self.z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("theta argument"));
        }
        self.policy.validate()
    }

    fn weight_degree(&self) -> usize {
        self.deriv_z.iter().sum::<usize>() + if self.deriv_tau.is_some() { 2 } else { 0 }
    }

    fn weight(&self, v: &[f64]) -> Complex64 {
        let mut w = Complex64::new(1.0, 0.0);
        for (&vi, &d) in v.iter().zip(&self.deriv_z) {
            for _ in 0..d {
                w *= 2.0 * PI * I * vi;
            }
        }
        if let Some((j, k)) = self.deriv_tau {
            let m = if j == k { PI } else { 2.0 * PI };
            w *= m * I * v[j] * v[k];
        }
        w
    }
}

/// Geometry of one truncated lattice sum.
struct LatticeBox {
    genus: usize,
    a: Vec<f64>,
    shifted_z: Vec<Complex64>,
    center: Vec<i64>,
    radius: usize,
}

impl LatticeBox {
    /// Centre the box on `-(Im tau)^{-1} Im z - a` and pick the smallest
    /// radius whose tail bound meets `tolerance`.
    fn new(
        z: &[Complex64],
        tau: &RiemannMatrix,
        ch: &ThetaCharacteristic,
        weight_degree: usize,
        tolerance: f64,
        max_radius: usize,
    ) -> Result<Self> {
        let g = tau.genus();
        let a = ch.a();
        let b = ch.b();
        let imz: Vec<f64> = z.iter().map(|c| c.im).collect();
        let yinv = tau.imag_inverse();
        let c: Vec<f64> = (0..g).map(|j| (0..g).map(|k| yinv[(j, k)] * imz[k]).sum()).collect();
        let y = tau.imag();
        let log_prefactor = PI
            * (0..g)
                .map(|j| (0..g).map(|k| c[j] * y[(j, k)] * c[k]).sum::<f64>())
                .sum::<f64>();
        let c_norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let radius = required_radius(
            g,
            tau.imag_min_eigenvalue(),
            log_prefactor,
            c_norm,
            weight_degree,
            tolerance,
            max_radius,
        )?;
        let center = (0..g).map(|j| (-c[j] - a[j]).round() as i64).collect();
        let shifted_z = z.iter().zip(&b).map(|(zj, bj)| zj + bj).collect();
        Ok(Self { genus: g, a, shifted_z, center, radius })
    }

    /// Visits every lattice vector `v = n + a` in the box, in a fixed order.
    fn for_each(&self, mut f: impl FnMut(&[f64])) {
        let g = self.genus;
        let r = self.radius as i64;
        let mut offset = vec![-r; g];
        let mut v = vec![0.0; g];
        loop {
            for j in 0..g {
                v[j] = (self.center[j] + offset[j]) as f64 + self.a[j];
            }
            f(&v);
            let mut j = 0;
            loop {
                if j == g {
                    return;
                }
                offset[j] += 1;
                if offset[j] <= r {
                    break;
                }
                offset[j] = -r;
                j += 1;
            }
        }
    }

    fn exponential(&self, v: &[f64], tau: &RiemannMatrix) -> Complex64 {
        let g = self.genus;
        let mut quad = Complex64::new(0.0, 0.0);
        for j in 0..g {
            let mut row = Complex64::new(0.0, 0.0);
            for k in 0..g {
                row += tau.entry(j, k) * v[k];
            }
            quad += row * v[j];
        }
        let lin: Complex64 = (0..g).map(|j| self.shifted_z[j] * v[j]).sum();
        (PI * I * quad + 2.0 * PI * I * lin).exp()
    }
}

/// Smallest lattice radius `R >= 1` for which the Gaussian tail bound of
/// the neglected terms is at most `tolerance`.
///
/// Outside the box of sup-radius `R` around the dominant term, a lattice
/// vector in shell `k > R` satisfies `|v + c| >= k - 1/2`, each term is
/// bounded by `exp(pi c^T Y c - pi lambda_min |v + c|^2)` times the
/// derivative weight `(2 pi |v|)^D`, and shell `k` holds at most
/// `2g (2k+1)^(g-1)` points.
fn required_radius(
    genus: usize,
    lambda_min: f64,
    log_prefactor: f64,
    c_norm: f64,
    weight_degree: usize,
    tolerance: f64,
    max_radius: usize,
) -> Result<usize> {
    let g = genus as f64;
    let log_tol = tolerance.ln();
    let log_shell = |k: f64| -> f64 {
        let count = (2.0 * g).ln() + (g - 1.0) * (2.0 * k + 1.0).ln();
        let vnorm = g.sqrt() * (k + 0.5) + c_norm;
        let weight = weight_degree as f64 * (2.0 * PI * vnorm).ln();
        log_prefactor + count + weight - PI * lambda_min * (k - 0.5) * (k - 0.5)
    };
    let log_tail = |r: usize| -> f64 {
        let mut acc = f64::NEG_INFINITY;
        let mut k = r + 1;
        loop {
            let t = log_shell(k as f64);
            acc = log_add(acc, t);
            // Shell terms decay super-exponentially once past the peak of
            // the polynomial weight.
            if t < acc - 40.0 && k > r + 2 {
                return acc;
            }
            k += 1;
            if k > r + 10_000 {
                return acc;
            }
        }
    };
    // The search runs past max_radius so the error can report what was needed.
    let search_limit = max_radius.max(1) * 4 + 64;
    for r in 1..=search_limit {
        if log_tail(r) <= log_tol {
            if r > max_radius {
                return Err(Error::TruncationBudgetExceeded { required: r, max_radius });
            }
            return Ok(r);
        }
    }
    Err(Error::TruncationBudgetExceeded { required: search_limit + 1, max_radius })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier-compensated complex accumulator.
#[derive(Default)]
struct CompensatedSum {
    re: f64,
    im: f64,
    re_c: f64,
    im_c: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, x.re);
        neumaier(&mut self.im, &mut self.im_c, x.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

fn finite(value: Complex64) -> Result<Complex64> {
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("theta value"))
    }
}

/// Evaluates the (differentiated) theta series described by `req`.
pub fn theta(req: &ThetaRequest<'_>) -> Result<Complex64> {
    req.validate()?;
    let lattice = LatticeBox::new(
        &req.z,
        req.tau,
        &req.characteristic,
        req.weight_degree(),
        req.policy.target_tolerance,
        req.policy.max_radius,
    )?;
    let mut sum = Complex64::new(0.0, 0.0);
    lattice.for_each(|v| sum += req.weight(v) * lattice.exponential(v, req.tau));
    finite(sum)
}

/// Result of the high-precision oracle mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: Complex64,
    pub radius: usize,
}

/// Oracle-mode evaluation: the radius needed for a `1e-30` tail, multiplied
/// by `radius_multiplier`, summed with compensated accumulation.
///
/// Used only to freeze regression fixtures. The policy's `max_radius` is
/// ignored.
pub fn theta_oracle(req: &ThetaRequest<'_>, radius_multiplier: usize) -> Result<OracleValue> {
    req.validate()?;
    let mut lattice = LatticeBox::new(
        &req.z,
        req.tau,
        &req.characteristic,
        req.weight_degree(),
        ORACLE_TOLERANCE,
        10_000,
    )?;
    lattice.radius *= radius_multiplier.max(1);
    let mut acc = CompensatedSum::default();
    lattice.for_each(|v| acc.add(req.weight(v) * lattice.exponential(v, req.tau)));
    Ok(OracleValue { value: finite(acc.value())?, radius: lattice.radius })
}

/// Genus-1 theta with characteristic `ch` and its first three `z`
/// derivatives, from a single lattice pass.
pub fn theta_jet(
    z: Complex64,
    tau: &RiemannMatrix,
    ch: &ThetaCharacteristic,
    policy: &TruncationPolicy,
) -> Result<[Complex64; 4]> {
    tau.scalar()?;
    policy.validate()?;
    if ch.genus() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: ch.genus() });
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite("theta argument"));
    }
    let lattice = LatticeBox::new(
        &[z],
        tau,
        ch,
        MAX_Z_DERIVATIVE,
        policy.target_tolerance,
        policy.max_radius,
    )?;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    lattice.for_each(|v| {
        let e = lattice.exponential(v, tau);
        let f = 2.0 * PI * I * v[0];
        out[0] += e;
        out[1] += f * e;
        out[2] += f * f * e;
        out[3] += f * f * f * e;
    });
    for o in &out {
        finite(*o)?;
    }
    Ok(out)
}

/// `d theta / d tau` for genus 1, term by term.
pub fn theta_dtau(
    z: Complex64,
    tau: &RiemannMatrix,
    ch: &ThetaCharacteristic,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    theta(
        &ThetaRequest::new(&[z], tau)
            .characteristic(ch)
            .deriv_tau(0, 0)
            .policy(*policy),
    )
}

/// Jacobi's odd theta function `theta_1(u) = -theta[1/2,1/2](u, tau)`.
pub fn theta1(u: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    Ok(-theta(
        &ThetaRequest::new(&[u], tau)
            .characteristic(&ThetaCharacteristic::odd_genus_one())
            .policy(*policy),
    )?)
}

/// `theta_1` and its first three derivatives at `u`.
pub fn theta1_jet(u: Complex64, tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<[Complex64; 4]> {
    let jet = theta_jet(u, tau, &ThetaCharacteristic::odd_genus_one(), policy)?;
    Ok(jet.map(|v| -v))
}

/// `theta_1'(0, tau)`.
pub fn theta1_prime_zero(tau: &RiemannMatrix, policy: &TruncationPolicy) -> Result<Complex64> {
    Ok(theta1_jet(Complex64::new(0.0, 0.0), tau, policy)?[1])
}

/// Automorphy factor `exp(-pi i m^T tau m - 2 pi i m^T z)`, so that
/// `theta(z + tau m + n) = factor * theta(z)` for characteristic `[0, 0]`.
pub fn theta_quasi_period_factor(
    z: &[Complex64],
    m: &[i64],
    n: &[i64],
    tau: &RiemannMatrix,
) -> Result<Complex64> {
    let g = tau.genus();
    for len in [z.len(), m.len(), n.len()] {
        if len != g {
            return Err(Error::DimensionMismatch { expected: g, got: len });
        }
    }
    let mut quad = Complex64::new(0.0, 0.0);
    for j in 0..g {
        for k in 0..g {
            quad += m[j] as f64 * tau.entry(j, k) * m[k] as f64;
        }
    }
    let lin: Complex64 = (0..g).map(|j| m[j] as f64 * z[j]).sum();
    Ok((-PI * I * quad - 2.0 * PI * I * lin).exp())
}

/// `z + tau m + n` for integer vectors `m`, `n`.
pub fn lattice_shift(z: &[Complex64], m: &[i64], n: &[i64], tau: &RiemannMatrix) -> Vec<Complex64> {
    let g = tau.genus();
    (0..g)
        .map(|j| {
            let tm: Complex64 = (0..g).map(|k| tau.entry(j, k) * m[k] as f64).sum();
            z[j] + tm + n[j] as f64
        })
        .collect()
}
