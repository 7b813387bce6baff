//! Run files and evaluation policies.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use szego_core::algebra::TruncationPolicy;
use szego_core::curves::{CurveModel, DecomposableBundle};
use szego_core::expansions::ExpansionOptions;
use szego_core::identities::JsonComplex;

use crate::suites::Suite;
use crate::CliError;

/// Environment variable naming a JSON policy file with default values.
pub const POLICY_ENV: &str = "SZEGO_POLICY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Sphere,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(default)]
    pub tau: Option<JsonComplex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub z: Vec<JsonComplex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub name: String,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub instances: Option<usize>,
}

/// Policy values as they appear in files; missing entries fall back to the
/// next layer (environment file, then built-in defaults).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default)]
    pub theta_tolerance: Option<f64>,
    #[serde(default)]
    pub max_radius: Option<usize>,
    #[serde(default)]
    pub ring_radius: Option<f64>,
    #[serde(default)]
    pub contour_samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PolicySpec {
    /// Entries of `self` take precedence over those of `base`.
    pub fn over(self, base: PolicySpec) -> PolicySpec {
        PolicySpec {
            theta_tolerance: self.theta_tolerance.or(base.theta_tolerance),
            max_radius: self.max_radius.or(base.max_radius),
            ring_radius: self.ring_radius.or(base.ring_radius),
            contour_samples: self.contour_samples.or(base.contour_samples),
            seed: self.seed.or(base.seed),
        }
    }

    pub fn resolve(self) -> Result<Policy, CliError> {
        let defaults = TruncationPolicy::default();
        let expansion = ExpansionOptions::default();
        let truncation = TruncationPolicy::new(
            self.theta_tolerance.unwrap_or(defaults.target_tolerance),
            self.max_radius.unwrap_or(defaults.max_radius),
        )
        .map_err(|e| CliError::Spec(format!("policy: {e}")))?;
        let ring_radius = self.ring_radius.unwrap_or(expansion.ring_radius);
        let samples = self.contour_samples.unwrap_or(expansion.samples);
        if !(ring_radius > 0.0 && ring_radius.is_finite()) {
            return Err(CliError::Spec("policy: ring_radius must be positive".into()));
        }
        if samples < 8 {
            return Err(CliError::Spec("policy: contour_samples must be at least 8".into()));
        }
        Ok(Policy {
            truncation,
            expansion: ExpansionOptions { ring_radius, samples, ..expansion },
            seed: self.seed.unwrap_or(0),
        })
    }
}

/// Fully resolved evaluation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub truncation: TruncationPolicy,
    pub expansion: ExpansionOptions,
    pub seed: u64,
}

/// Policy as echoed into every report entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEcho {
    pub theta_tolerance: f64,
    pub max_radius: usize,
    pub ring_radius: f64,
    pub contour_samples: usize,
    pub seed: u64,
}

impl From<&Policy> for PolicyEcho {
    fn from(p: &Policy) -> Self {
        Self {
            theta_tolerance: p.truncation.target_tolerance,
            max_radius: p.truncation.max_radius,
            ring_radius: p.expansion.ring_radius,
            contour_samples: p.expansion.samples,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub curve: CurveSpec,
    #[serde(default)]
    pub bundle: Option<BundleSpec>,
    /// Empty selects every suite applicable to the curve.
    #[serde(default)]
    pub suites: Vec<SuiteSpec>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Extra moduli for `freeze-fixtures`.
    #[serde(default)]
    pub fixture_taus: Vec<JsonComplex>,
}

/// A validated run: curve, optional bundle and selected suites.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub curve: CurveModel,
    pub bundle: Option<DecomposableBundle>,
    pub suites: Vec<(Suite, SuiteSpec)>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))
}

/// Policy file named by [`POLICY_ENV`], if set.
pub fn env_policy() -> Result<PolicySpec, CliError> {
    match std::env::var_os(POLICY_ENV) {
        Some(p) if !p.is_empty() => read_json(Path::new(&p)),
        _ => Ok(PolicySpec::default()),
    }
}

pub fn curve_model(spec: &CurveSpec) -> Result<CurveModel, CliError> {
    match (spec.kind, spec.tau) {
        (CurveKind::Sphere, None) => Ok(CurveModel::Sphere),
        (CurveKind::Sphere, Some(_)) => Err(CliError::Spec("a sphere takes no tau".into())),
        (CurveKind::Torus, Some(t)) => {
            CurveModel::torus(t.into()).map_err(|e| CliError::Spec(format!("tau: {e}")))
        }
        (CurveKind::Torus, None) => Err(CliError::Spec("a torus needs tau".into())),
    }
}

impl RunSpec {
    pub fn resolve(&self, policy: &Policy) -> Result<ResolvedRun, CliError> {
        let curve = curve_model(&self.curve)?;
        let bundle = match &self.bundle {
            None => None,
            Some(b) => {
                if b.z.is_empty() {
                    return Err(CliError::Spec("bundle needs at least one z".into()));
                }
                let zs: Vec<Complex64> = b.z.iter().map(|&v| v.into()).collect();
                Some(
                    DecomposableBundle::on_curve(&zs, &curve, &policy.truncation)
                        .map_err(|e| CliError::Spec(format!("bundle: {e}")))?,
                )
            }
        };
        let selected: Vec<SuiteSpec> = if self.suites.is_empty() {
            Suite::ALL
                .iter()
                .filter(|s| s.applies_to(&curve))
                .map(|s| SuiteSpec { name: s.name().to_string(), tolerance: None, instances: None })
                .collect()
        } else {
            self.suites.clone()
        };
        let mut suites = Vec::new();
        for s in selected {
            let suite = Suite::from_name(&s.name).ok_or_else(|| CliError::Spec(format!("unknown suite {:?}", s.name)))?;
            if !suite.applies_to(&curve) {
                return Err(CliError::Spec(format!("suite {:?} needs a torus", s.name)));
            }
            if let Some(t) = s.tolerance {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(CliError::Spec(format!("suite {:?}: tolerance must be finite and >= 0", s.name)));
                }
            }
            if s.instances == Some(0) {
                return Err(CliError::Spec(format!("suite {:?}: instances must be positive", s.name)));
            }
            suites.push((suite, s));
        }
        Ok(ResolvedRun { curve, bundle, suites })
    }
}
