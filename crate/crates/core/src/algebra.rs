//! Riemann matrices, theta characteristics and truncation policies.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest genus for which [`enumerate_characteristics`] will list all `4^g`
/// characteristics.
pub const MAX_CHARACTERISTIC_GENUS: usize = 6;

/// A validated genus-`g` Riemann matrix: symmetric, with positive definite
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannMatrix {
    entries: DMatrix<Complex64>,
    imag: DMatrix<f64>,
    imag_inverse: DMatrix<f64>,
    imag_min_eigenvalue: f64,
}

/// Validates a square complex matrix as a Riemann matrix.
///
/// Symmetry is checked on the stored values with no tolerance. Positive
/// definiteness of the imaginary part is decided by whether a Cholesky
/// factorization succeeds.
pub fn validate_riemann_matrix(rows: &[Vec<Complex64>]) -> Result<RiemannMatrix> {
    let g = rows.len();
    if g == 0 {
        return Err(Error::EmptyMatrix);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != g {
            return Err(Error::NotSquare { rows: g, row, len: r.len() });
        }
    }
    if rows.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("Riemann matrix"));
    }
    for row in 0..g {
        for col in (row + 1)..g {
            if rows[row][col] != rows[col][row] {
                return Err(Error::NotSymmetric { row, col });
            }
        }
    }
    let entries = DMatrix::from_fn(g, g, |j, k| rows[j][k]);
    let imag = entries.map(|c| c.im);
    let chol = Cholesky::new(imag.clone()).ok_or(Error::ImaginaryPartNotPositiveDefinite)?;
    let imag_inverse = chol.inverse();
    let imag_min_eigenvalue = SymmetricEigen::new(imag.clone()).eigenvalues.min();
    if !(imag_min_eigenvalue > 0.0) {
        return Err(Error::ImaginaryPartNotPositiveDefinite);
    }
    Ok(RiemannMatrix { entries, imag, imag_inverse, imag_min_eigenvalue })
}

impl RiemannMatrix {
    /// Genus-1 modulus `tau` of the torus `C / (Z + tau Z)`.
    pub fn genus_one(tau: Complex64) -> Result<Self> {
        validate_riemann_matrix(&[vec![tau]])
    }

    pub fn genus(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.entries[(j, k)]
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn imag(&self) -> &DMatrix<f64> {
        &self.imag
    }

    pub(crate) fn imag_inverse(&self) -> &DMatrix<f64> {
        &self.imag_inverse
    }

    /// Smallest eigenvalue of `Im(tau)`; controls the Gaussian decay of
    /// theta series terms.
    pub fn imag_min_eigenvalue(&self) -> f64 {
        self.imag_min_eigenvalue
    }

    /// The genus-1 modulus, or an error for higher genus.
    pub fn scalar(&self) -> Result<Complex64> {
        if self.genus() != 1 {
            return Err(Error::RequiresGenusOne(self.genus()));
        }
        Ok(self.entries[(0, 0)])
    }

    /// Rows as nested vectors, as accepted by [`validate_riemann_matrix`].
    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.genus())
            .map(|j| (0..self.genus()).map(|k| self.entries[(j, k)]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Half-integer characteristic `[a, b]` with `a, b` in `{0, 1/2}^g`.
///
/// Entries are stored as numerators over 2, so `1` means `1/2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaCharacteristic {
    a: Vec<u8>,
    b: Vec<u8>,
}

impl ThetaCharacteristic {
    /// Builds a characteristic from numerators over 2 (each entry 0 or 1).
    pub fn from_halves(a: Vec<u8>, b: Vec<u8>) -> Result<Self> {
        let genus = a.len();
        if genus == 0 || b.len() != genus || a.iter().chain(&b).any(|&v| v > 1) {
            return Err(Error::InvalidCharacteristic { genus });
        }
        Ok(Self { a, b })
    }

    /// Builds a characteristic from real entries, each of which must be
    /// exactly `0.0` or `0.5`.
    pub fn from_values(a: &[f64], b: &[f64]) -> Result<Self> {
        let genus = a.len();
        let conv = |v: &[f64]| -> Result<Vec<u8>> {
            v.iter()
                .map(|&x| {
                    if x == 0.0 {
                        Ok(0)
                    } else if x == 0.5 {
                        Ok(1)
                    } else {
                        Err(Error::InvalidCharacteristic { genus })
                    }
                })
                .collect()
        };
        Self::from_halves(conv(a)?, conv(b)?)
    }

    /// The characteristic `[0, 0]` of Riemann's theta function.
    pub fn zero(genus: usize) -> Self {
        Self { a: vec![0; genus], b: vec![0; genus] }
    }

    /// The genus-1 odd characteristic `[1/2, 1/2]`.
    pub fn odd_genus_one() -> Self {
        Self { a: vec![1], b: vec![1] }
    }

    pub fn genus(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> Vec<f64> {
        self.a.iter().map(|&v| 0.5 * f64::from(v)).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        self.b.iter().map(|&v| 0.5 * f64::from(v)).collect()
    }

    /// `(4 a.b) mod 2`.
    pub fn parity(&self) -> Parity {
        let dot: u32 = self.a.iter().zip(&self.b).map(|(&x, &y)| u32::from(x * y)).sum();
        if dot.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

pub fn parity(ch: &ThetaCharacteristic) -> Parity {
    ch.parity()
}

/// All `4^g` half-integer characteristics of genus `g`, in lexicographic
/// order of the bit pattern `(a, b)`.
pub fn enumerate_characteristics(genus: usize) -> Result<Vec<(ThetaCharacteristic, Parity)>> {
    if genus == 0 || genus > MAX_CHARACTERISTIC_GENUS {
        return Err(Error::GenusOutOfRange { genus, max: MAX_CHARACTERISTIC_GENUS });
    }
    let total = 1usize << (2 * genus);
    Ok((0..total)
        .map(|bits| {
            let a = (0..genus).map(|i| ((bits >> (2 * genus - 1 - i)) & 1) as u8).collect();
            let b = (0..genus).map(|i| ((bits >> (genus - 1 - i)) & 1) as u8).collect();
            let ch = ThetaCharacteristic { a, b };
            let p = ch.parity();
            (ch, p)
        })
        .collect())
}

/// Controls truncation of lattice sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Absolute bound on the neglected tail of every theta series.
    pub target_tolerance: f64,
    /// Largest lattice radius the engine may use.
    pub max_radius: usize,
}

impl TruncationPolicy {
    pub fn new(target_tolerance: f64, max_radius: usize) -> Result<Self> {
        let p = Self { target_tolerance, max_radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_tolerance > 0.0) || !self.target_tolerance.is_finite() {
            return Err(Error::InvalidPolicy("target_tolerance must be positive and finite"));
        }
        if self.max_radius < 1 {
            return Err(Error::InvalidPolicy("max_radius must be at least 1"));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { target_tolerance: 1e-16, max_radius: 60 }
    }
}
