//! Regression fixtures computed in oracle mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use szego_core::algebra::{RiemannMatrix, ThetaCharacteristic};
use szego_core::identities::JsonComplex;
use szego_core::theta::{theta_oracle, ThetaRequest, ORACLE_TOLERANCE};

use crate::spec::{curve_model, RunSpec};
use crate::CliError;

/// Default radius multiplier of the oracle.
pub const DEFAULT_ORACLE_MULTIPLIER: usize = 10;
/// Argument of the frozen `p` values.
pub const P_ARGUMENT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub date: String,
    pub oracle_tolerance: f64,
    pub radius_multiplier: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub name: String,
    pub tau: JsonComplex,
    pub value: JsonComplex,
    /// Largest lattice radius used for this entry.
    pub oracle_radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub provenance: Provenance,
    pub entries: Vec<FixtureEntry>,
}

/// `theta[1/2,1/2]` and its first three derivatives at `u`, with the
/// largest radius used.
fn odd_jet(u: Complex64, tau: &RiemannMatrix, multiplier: usize) -> Result<([Complex64; 4], usize), CliError> {
    let ch = ThetaCharacteristic::odd_genus_one();
    let mut jet = [Complex64::new(0.0, 0.0); 4];
    let mut radius = 0;
    for (k, slot) in jet.iter_mut().enumerate() {
        let v = theta_oracle(&ThetaRequest::new(&[u], tau).characteristic(&ch).deriv_z(&[k]), multiplier)?;
        *slot = v.value;
        radius = radius.max(v.radius);
    }
    Ok((jet, radius))
}

/// Fixture entries for one modulus: `theta(0)`, `theta_1'(0)`, `p_rel` and
/// `p'` at [`P_ARGUMENT`], and the offset `-theta_1'''(0) / (6 theta_1'(0))`.
pub fn fixtures_for(tau: Complex64, multiplier: usize) -> Result<Vec<FixtureEntry>, CliError> {
    let m = RiemannMatrix::genus_one(tau).map_err(|e| CliError::Spec(format!("tau: {e}")))?;
    let zero = Complex64::new(0.0, 0.0);
    let entry = |name: &str, value: Complex64, oracle_radius: usize| FixtureEntry {
        name: name.to_string(),
        tau: tau.into(),
        value: value.into(),
        oracle_radius,
    };
    let theta0 = theta_oracle(&ThetaRequest::new(&[zero], &m), multiplier)?;
    // theta_1 = -theta[1/2,1/2]; ratios below are sign-independent.
    let (at_zero, r0) = odd_jet(zero, &m, multiplier)?;
    let (at_p, rp) = odd_jet(Complex64::new(P_ARGUMENT, 0.0), &m, multiplier)?;
    let l1 = at_p[1] / at_p[0];
    let r2 = at_p[2] / at_p[0];
    let r3 = at_p[3] / at_p[0];
    let p_rel = -(r2 - l1 * l1);
    let p_prime = -(r3 - 3.0 * r2 * l1 + 2.0 * l1 * l1 * l1);
    let offset = -at_zero[3] / (6.0 * at_zero[1]);
    Ok(vec![
        entry("theta(0)", theta0.value, theta0.radius),
        entry("theta1'(0)", -at_zero[1], r0),
        entry("p_rel(0.3)", p_rel, rp),
        entry("p_rel'(0.3)", p_prime, rp),
        entry("extended-connection-offset", offset, r0),
    ])
}

/// Moduli to freeze: the spec's torus modulus followed by `fixture_taus`.
pub fn fixture_moduli(spec: &RunSpec) -> Result<Vec<Complex64>, CliError> {
    let curve = curve_model(&spec.curve)?;
    let mut taus: Vec<Complex64> = curve.tau().map(|t| t.entry(0, 0)).into_iter().collect();
    taus.extend(spec.fixture_taus.iter().map(|&t| Complex64::from(t)));
    if taus.is_empty() {
        return Err(CliError::Spec("no modulus to freeze: use a torus or fixture_taus".into()));
    }
    Ok(taus)
}

pub fn freeze(spec: &RunSpec, multiplier: usize, seed: u64, date: String) -> Result<FixtureFile, CliError> {
    if multiplier == 0 {
        return Err(CliError::Spec("oracle radius multiplier must be positive".into()));
    }
    let mut entries = Vec::new();
    for tau in fixture_moduli(spec)? {
        entries.extend(fixtures_for(tau, multiplier)?);
    }
    Ok(FixtureFile {
        provenance: Provenance {
            generator: format!("szego {}", env!("CARGO_PKG_VERSION")),
            date,
            oracle_tolerance: ORACLE_TOLERANCE,
            radius_multiplier: multiplier,
            seed,
        },
        entries,
    })
}
