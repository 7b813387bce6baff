//! Named verification suites and their default parameters.

use num_complex::Complex64;
use szego_core::algebra::RiemannMatrix;
use szego_core::curves::{BundlePoint, CurveModel, DecomposableBundle, PointOnCurve, TestFunction};
use szego_core::expansions::{extended_connection_offset, DivisorCrossing};
use szego_core::identities::{
    frozen_offset, singular_points, verify_characteristic_census, verify_composition_identity,
    verify_connection_identification, verify_degenerate_continuity, verify_degenerate_identity,
    verify_determinant_near_divisor, verify_determinant_theorem, verify_divisor_behavior, verify_extended_connection,
    verify_residue_normalization, verify_theta_heat, verify_theta_parity, verify_theta_quasi_periodicity,
    verify_theta_tau_finite_difference, verify_torsor_difference, DivisorTolerances, ExpansionInstance,
    IdentityReport, KernelInstance, ThetaInstance, FROZEN_OFFSETS,
};
use szego_core::sampling::{Sampler, SAMPLE_MARGIN};
use szego_core::Result;

use crate::spec::Policy;

/// Zero of the test function `p_rel(u) - p_rel(a)` used on tori.
pub const TEST_FUNCTION_ZERO: f64 = 0.3;
/// Separation `|y - x|` of the continuity check of the degenerate identity.
pub const CONTINUITY_STEP: f64 = 1e-4;
/// Distance kept between continuity samples and the zeros and poles of the
/// test function; the central difference has an `O(step^2 / d^3)` bias at
/// distance `d`.
pub const CONTINUITY_MARGIN: f64 = 0.1;
/// Bundles per report in the composition and degenerate suites.
const BUNDLES_PER_REPORT: usize = 4;
/// Bundles per modulus in the extended-connection suite.
const BUNDLES_PER_MODULUS: usize = 10;
/// Halving steps of the log-pole scan.
const SCAN_STEPS: usize = 8;
/// Path samples of the boundedness check.
const PATH_SAMPLES: usize = 200;
/// Distance of the last bundle component from the divisor.
const NEAR_DIVISOR_EPSILONS: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ThetaQuasiPeriodicity,
    ThetaParity,
    ThetaHeat,
    CharacteristicCensus,
    ResidueNormalization,
    Composition,
    Degenerate,
    Determinant,
    Expansion2Delta,
    Expansion3Delta,
    DivisorBehavior,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::ThetaQuasiPeriodicity,
        Suite::ThetaParity,
        Suite::ThetaHeat,
        Suite::CharacteristicCensus,
        Suite::ResidueNormalization,
        Suite::Composition,
        Suite::Degenerate,
        Suite::Determinant,
        Suite::Expansion2Delta,
        Suite::Expansion3Delta,
        Suite::DivisorBehavior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ThetaQuasiPeriodicity => "theta-quasi-periodicity",
            Suite::ThetaParity => "theta-parity",
            Suite::ThetaHeat => "theta-heat",
            Suite::CharacteristicCensus => "characteristic-census",
            Suite::ResidueNormalization => "residue-normalization",
            Suite::Composition => "composition",
            Suite::Degenerate => "degenerate",
            Suite::Determinant => "determinant",
            Suite::Expansion2Delta => "expansion-2delta",
            Suite::Expansion3Delta => "expansion-3delta",
            Suite::DivisorBehavior => "divisor-behavior",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn applies_to(self, curve: &CurveModel) -> bool {
        !curve.is_sphere() || !matches!(self, Suite::Expansion2Delta | Suite::Expansion3Delta | Suite::DivisorBehavior)
    }

    pub fn default_instances(self) -> usize {
        match self {
            Suite::CharacteristicCensus => 3,
            Suite::Expansion3Delta => 5,
            Suite::DivisorBehavior => 1,
            _ => 100,
        }
    }

    fn seed_offset(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).unwrap_or(0) as u64 + 1
    }
}

/// Inputs shared by every suite of one run.
pub struct SuiteContext<'a> {
    pub curve: &'a CurveModel,
    pub bundle: Option<&'a DecomposableBundle>,
    pub policy: &'a Policy,
}

struct Run<'a> {
    ctx: &'a SuiteContext<'a>,
    instances: usize,
    tolerance: Option<f64>,
    sampler: Sampler,
}

impl Run<'_> {
    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn seed(&self) -> u64 {
        self.ctx.policy.seed
    }

    fn tau(&self) -> Option<Complex64> {
        self.ctx.curve.tau().map(|t| t.entry(0, 0))
    }

    fn random_bundle(&mut self, rank: usize) -> Result<DecomposableBundle> {
        match self.tau() {
            None => DecomposableBundle::new(vec![BundlePoint::trivial(); rank]),
            Some(t) => {
                let zs: Vec<Complex64> = (0..rank).map(|_| self.sampler.bundle_point(t)).collect();
                DecomposableBundle::on_curve(&zs, self.ctx.curve, &self.ctx.policy.truncation)
            }
        }
    }

    /// The spec's bundle if one was given, otherwise a random one.
    fn bundle(&mut self, rank: usize) -> Result<DecomposableBundle> {
        match self.ctx.bundle {
            Some(b) => Ok(b.clone()),
            None => self.random_bundle(rank),
        }
    }

    fn test_function(&self) -> Result<TestFunction> {
        match self.ctx.curve.tau() {
            None => Ok(TestFunction::SphereCoordinate),
            Some(t) => {
                TestFunction::weierstrass_shifted(Complex64::new(TEST_FUNCTION_ZERO, 0.0), t, &self.ctx.policy.truncation)
            }
        }
    }

    fn theta_instances(&mut self, genus: usize) -> Vec<ThetaInstance> {
        (0..self.instances)
            .map(|_| {
                let tau = self.sampler.riemann_matrix(genus);
                let z = (0..genus).map(|_| self.sampler.complex((-1.0, 1.0), (-0.5, 0.5))).collect();
                let m = self.sampler.integer_vector(genus, 2);
                let n = self.sampler.integer_vector(genus, 2);
                ThetaInstance { tau, z, m, n }
            })
            .collect()
    }

    fn theta_suite(
        &mut self,
        base: &str,
        default_tol: f64,
        verify: fn(&[ThetaInstance], &szego_core::algebra::TruncationPolicy, f64, u64) -> IdentityReport,
    ) -> Vec<IdentityReport> {
        let mut out = Vec::new();
        for g in [1, 2] {
            let inst = self.theta_instances(g);
            let mut r = verify(&inst, &self.ctx.policy.truncation, self.tol(default_tol), self.seed());
            r.identity_name = format!("{base}/g{g}");
            out.push(r);
        }
        out
    }

    /// Splits the run's instances over several bundles of `rank` and merges
    /// the per-bundle reports.
    fn per_bundle<F>(&mut self, name: &str, rank: usize, tol: f64, mut each: F) -> Result<IdentityReport>
    where
        F: FnMut(&mut Self, &DecomposableBundle, usize) -> Result<IdentityReport>,
    {
        let groups = if self.ctx.bundle.is_some() { 1 } else { BUNDLES_PER_REPORT.min(self.instances) };
        let mut records = Vec::new();
        for i in 0..groups {
            let count = self.instances / groups + usize::from(i < self.instances % groups);
            let bundle = self.bundle(rank)?;
            records.extend(each(self, &bundle, count)?.records);
        }
        Ok(IdentityReport::from_records(name, tol, self.seed(), records))
    }

    fn ranks(&self, sphere: &[usize], torus: &[usize]) -> Vec<usize> {
        match (self.ctx.bundle, self.ctx.curve.is_sphere()) {
            (Some(b), _) => vec![b.rank()],
            (None, true) => sphere.to_vec(),
            (None, false) => torus.to_vec(),
        }
    }

    fn composition(&mut self) -> Result<Vec<IdentityReport>> {
        let f = self.test_function()?;
        let singular = singular_points(&f, self.ctx.curve, &self.ctx.policy.truncation)?;
        let sphere = self.ctx.curve.is_sphere();
        let tol = self.tol(if sphere { 1e-13 } else { 1e-8 });
        let mut out = Vec::new();
        for rank in self.ranks(&[1], &[1, 2]) {
            let name = format!("composition/rank{rank}");
            let report = self.per_bundle(&name, rank, tol, |run, bundle, count| {
                let mut pairs = Vec::with_capacity(count);
                if sphere {
                    pairs.push((PointOnCurve(Complex64::new(1.0, 0.0)), PointOnCurve(Complex64::new(2.0, 0.0))));
                }
                while pairs.len() < count {
                    let (x, y) = run.sampler.pair_avoiding(run.ctx.curve, &singular, SAMPLE_MARGIN);
                    pairs.push((PointOnCurve(x), PointOnCurve(y)));
                }
                verify_composition_identity(
                    &name,
                    run.ctx.curve,
                    bundle,
                    &f,
                    &pairs,
                    &run.ctx.policy.truncation,
                    tol,
                    run.seed(),
                )
            })?;
            out.push(report);
        }
        Ok(out)
    }

    fn degenerate(&mut self) -> Result<Vec<IdentityReport>> {
        let f = self.test_function()?;
        let singular = singular_points(&f, self.ctx.curve, &self.ctx.policy.truncation)?;
        let sphere = self.ctx.curve.is_sphere();
        let tol = self.tol(1e-7);
        let continuity_tol = self.tol(1e-5);
        let mut out = Vec::new();
        for rank in self.ranks(&[1], &[1, 2]) {
            let mut points = Vec::new();
            if sphere {
                points.push(PointOnCurve(Complex64::new(2.0, 0.0)));
            }
            while points.len() < self.instances {
                points.push(PointOnCurve(self.sampler.point_avoiding(self.ctx.curve, &singular, SAMPLE_MARGIN)));
            }
            let mut near = Vec::new();
            if sphere {
                near.push(PointOnCurve(Complex64::new(2.0, 0.0)));
            }
            while near.len() < self.instances {
                near.push(PointOnCurve(self.sampler.point_avoiding(self.ctx.curve, &singular, CONTINUITY_MARGIN)));
            }
            let bundle = self.bundle(rank)?;
            let t = &self.ctx.policy.truncation;
            out.push(verify_degenerate_identity(
                &format!("degenerate/rank{rank}"),
                self.ctx.curve,
                &bundle,
                &f,
                &points,
                t,
                tol,
                self.seed(),
            )?);
            out.push(verify_degenerate_continuity(
                &format!("degenerate/rank{rank}/continuity"),
                self.ctx.curve,
                &bundle,
                &f,
                &near,
                CONTINUITY_STEP,
                t,
                continuity_tol,
                self.seed(),
            )?);
        }
        Ok(out)
    }

    fn residue_normalization(&mut self) -> Result<Vec<IdentityReport>> {
        let mut inst = Vec::with_capacity(self.instances);
        for i in 0..self.instances {
            let x = PointOnCurve(self.sampler.curve_point(self.ctx.curve));
            inst.push((x, self.bundle(1 + i % 3)?));
        }
        Ok(vec![verify_residue_normalization(
            self.ctx.curve,
            &inst,
            &self.ctx.policy.truncation,
            &self.ctx.policy.expansion,
            self.tol(1e-8),
            self.seed(),
        )])
    }

    fn determinant(&mut self) -> Result<Vec<IdentityReport>> {
        let tol = self.tol(1e-9);
        let mut out = Vec::new();
        for rank in self.ranks(&[1, 2, 3], &[1, 2, 3]) {
            let mut inst = Vec::with_capacity(self.instances);
            for _ in 0..self.instances {
                let (x, y) = self.sampler.pair_avoiding(self.ctx.curve, &[], SAMPLE_MARGIN);
                let bundle = self.bundle(rank)?;
                inst.push(KernelInstance { x: PointOnCurve(x), y: PointOnCurve(y), bundle });
            }
            out.push(verify_determinant_theorem(
                &format!("determinant/rank{rank}"),
                self.ctx.curve,
                &inst,
                &self.ctx.policy.truncation,
                tol,
                self.seed(),
            ));
        }
        if let Some(t) = self.tau() {
            let fixed = [self.sampler.bundle_point(t), self.sampler.bundle_point(t)];
            let (x, y) = self.sampler.pair_avoiding(self.ctx.curve, &[], 0.05);
            out.push(verify_determinant_near_divisor(
                self.ctx.curve,
                PointOnCurve(x),
                PointOnCurve(y),
                fixed,
                &NEAR_DIVISOR_EPSILONS,
                &self.ctx.policy.truncation,
                self.tol(1e-6),
                self.seed(),
            )?);
        }
        Ok(out)
    }

    fn expansion_2delta(&mut self) -> Result<Vec<IdentityReport>> {
        let matrix = self.ctx.curve.tau().cloned().ok_or(szego_core::Error::CurveMismatch)?;
        let t = matrix.entry(0, 0);
        let mut inst = Vec::with_capacity(self.instances);
        let mut pairs = Vec::with_capacity(self.instances);
        for _ in 0..self.instances {
            let x = PointOnCurve(self.sampler.torus_point(t));
            let z = self.sampler.bundle_point(t);
            inst.push(ExpansionInstance { tau: matrix.clone(), x, z });
            let z2 = self.sampler.bundle_point(t);
            pairs.push((ExpansionInstance { tau: matrix.clone(), x, z }, z2));
        }
        let (p, o) = (&self.ctx.policy.truncation, &self.ctx.policy.expansion);
        Ok(vec![
            verify_connection_identification(&inst, p, o, self.tol(1e-7), self.seed()),
            verify_torsor_difference(&pairs, p, o, self.tol(1e-8), self.seed()),
        ])
    }

    fn expansion_3delta(&mut self) -> Result<Vec<IdentityReport>> {
        let p = &self.ctx.policy.truncation;
        let mut moduli: Vec<(Complex64, Complex64)> = FROZEN_OFFSETS.to_vec();
        if let Some(t) = self.tau() {
            if frozen_offset(t).is_none() {
                let live = extended_connection_offset(&RiemannMatrix::genus_one(t)?, p)?;
                moduli.push((t, live));
            }
        }
        moduli.truncate(self.instances.max(1));
        let mut cases = Vec::with_capacity(moduli.len());
        for (t, expected) in moduli {
            let zs = (0..BUNDLES_PER_MODULUS).map(|_| self.sampler.bundle_point(t)).collect();
            cases.push((RiemannMatrix::genus_one(t)?, zs, expected));
        }
        let x = PointOnCurve(Complex64::new(0.13, 0.07));
        let (spread, offset) = verify_extended_connection(
            &cases,
            x,
            p,
            &self.ctx.policy.expansion,
            self.tol(1e-7),
            self.tol(1e-7),
            self.seed(),
        );
        Ok(vec![spread, offset])
    }

    fn divisor_behavior(&mut self) -> Result<Vec<IdentityReport>> {
        let matrix = self.ctx.curve.tau().cloned().ok_or(szego_core::Error::CurveMismatch)?;
        let crossing = DivisorCrossing::through_standard_zero(matrix.entry(0, 0));
        let defaults = DivisorTolerances::default();
        let tolerances = DivisorTolerances {
            residue: self.tol(defaults.residue),
            boundedness: self.tol(defaults.boundedness),
            diagonal_vanishing: self.tol(defaults.diagonal_vanishing),
        };
        verify_divisor_behavior(
            &matrix,
            &crossing,
            &self.ctx.policy.truncation,
            &self.ctx.policy.expansion,
            SCAN_STEPS,
            PATH_SAMPLES,
            &tolerances,
            self.seed(),
        )
    }
}

/// Runs one suite. `instances` and `tolerance` override the defaults; a
/// tolerance override applies to every report of the suite.
pub fn run_suite(
    suite: Suite,
    ctx: &SuiteContext<'_>,
    instances: Option<usize>,
    tolerance: Option<f64>,
) -> Result<Vec<IdentityReport>> {
    let mut run = Run {
        ctx,
        instances: instances.unwrap_or_else(|| suite.default_instances()),
        tolerance,
        sampler: Sampler::new(ctx.policy.seed.wrapping_add(suite.seed_offset().wrapping_mul(0x9E37_79B9_7F4A_7C15))),
    };
    match suite {
        Suite::ThetaQuasiPeriodicity => Ok(run.theta_suite(suite.name(), 1e-10, verify_theta_quasi_periodicity)),
        Suite::ThetaParity => Ok(run.theta_suite(suite.name(), 1e-11, verify_theta_parity)),
        Suite::ThetaHeat => {
            let mut out = run.theta_suite(suite.name(), 1e-9, verify_theta_heat);
            let inst = run.theta_instances(1);
            let mut fd =
                verify_theta_tau_finite_difference(&inst, &ctx.policy.truncation, 1e-5, run.tol(1e-6), run.seed());
            fd.identity_name = format!("{}/g1/tau-finite-difference", suite.name());
            out.push(fd);
            Ok(out)
        }
        Suite::CharacteristicCensus => {
            let genera: Vec<usize> = (1..=run.instances.min(6)).collect();
            let mut r = verify_characteristic_census(&genera, run.seed());
            if let Some(t) = tolerance {
                r = IdentityReport::from_records(&r.identity_name, t, r.seed, r.records);
            }
            Ok(vec![r])
        }
        Suite::ResidueNormalization => run.residue_normalization(),
        Suite::Composition => run.composition(),
        Suite::Degenerate => run.degenerate(),
        Suite::Determinant => run.determinant(),
        Suite::Expansion2Delta => run.expansion_2delta(),
        Suite::Expansion3Delta => run.expansion_3delta(),
        Suite::DivisorBehavior => run.divisor_behavior(),
    }
}
