//! Seeded generation of random moduli, points and bundles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{validate_riemann_matrix, RiemannMatrix};
use crate::curves::{lattice_distance, theta_zero_guess, CurveModel};

/// Minimum distance kept between random samples and any singular locus.
pub const SAMPLE_MARGIN: f64 = 1e-3;

/// Minimum lattice distance between a random bundle and the theta divisor.
pub const BUNDLE_MARGIN: f64 = 0.05;

/// Deterministic sample generator; identical seeds give identical streams.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn complex(&mut self, re: (f64, f64), im: (f64, f64)) -> Complex64 {
        Complex64::new(self.uniform(re.0, re.1), self.uniform(im.0, im.1))
    }

    pub fn integer_vector(&mut self, len: usize, bound: i64) -> Vec<i64> {
        (0..len).map(|_| self.rng.gen_range(-bound..=bound)).collect()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.gen_range(0..len)
    }

    /// Genus-1 modulus with `Re` in `[-0.5, 0.5)` and `Im` in `[0.7, 1.5)`.
    pub fn modulus(&mut self) -> Complex64 {
        self.complex((-0.5, 0.5), (0.7, 1.5))
    }

    /// Riemann matrix with diagonally dominant imaginary part.
    pub fn riemann_matrix(&mut self, genus: usize) -> RiemannMatrix {
        loop {
            let mut rows = vec![vec![Complex64::new(0.0, 0.0); genus]; genus];
            for j in 0..genus {
                rows[j][j] = self.complex((-0.5, 0.5), (0.8, 1.5));
            }
            for j in 0..genus {
                for k in (j + 1)..genus {
                    let v = self.complex((-0.5, 0.5), (-0.25, 0.25));
                    rows[j][k] = v;
                    rows[k][j] = v;
                }
            }
            if let Ok(t) = validate_riemann_matrix(&rows) {
                return t;
            }
        }
    }

    /// A representative `s + t tau` with `s, t` in `[0, 1)`.
    pub fn torus_point(&mut self, tau: Complex64) -> Complex64 {
        let s = self.uniform(0.0, 1.0);
        let t = self.uniform(0.0, 1.0);
        s + t * tau
    }

    /// A point of the sphere's affine chart in the box `[-3, 3]^2`.
    pub fn sphere_point(&mut self) -> Complex64 {
        self.complex((-3.0, 3.0), (-3.0, 3.0))
    }

    pub fn curve_point(&mut self, curve: &CurveModel) -> Complex64 {
        match curve.tau() {
            Some(t) => self.torus_point(t.entry(0, 0)),
            None => self.sphere_point(),
        }
    }

    /// A bundle `z` at lattice distance at least [`BUNDLE_MARGIN`] from the
    /// theta zero `1/2 + tau/2`.
    pub fn bundle_point(&mut self, tau: Complex64) -> Complex64 {
        loop {
            let z = self.torus_point(tau) - 0.5 * (1.0 + tau);
            if lattice_distance(z - theta_zero_guess(tau), tau) >= BUNDLE_MARGIN {
                return z;
            }
        }
    }

    /// A curve point at distance at least `margin` from each point of
    /// `avoid` (modulo the lattice on a torus).
    pub fn point_avoiding(&mut self, curve: &CurveModel, avoid: &[Complex64], margin: f64) -> Complex64 {
        loop {
            let p = self.curve_point(curve);
            if avoid.iter().all(|&q| curve_distance(curve, p, q) >= margin) {
                return p;
            }
        }
    }

    /// An off-diagonal pair, both points avoiding `avoid`.
    pub fn pair_avoiding(&mut self, curve: &CurveModel, avoid: &[Complex64], margin: f64) -> (Complex64, Complex64) {
        let x = self.point_avoiding(curve, avoid, margin);
        let mut with_x = avoid.to_vec();
        with_x.push(x);
        let y = self.point_avoiding(curve, &with_x, margin);
        (x, y)
    }
}

/// Distance between two points of the curve: Euclidean on the sphere's
/// chart, lattice distance on a torus.
pub fn curve_distance(curve: &CurveModel, p: Complex64, q: Complex64) -> f64 {
    match curve.tau() {
        Some(t) => lattice_distance(p - q, t.entry(0, 0)),
        None => (p - q).norm(),
    }
}
