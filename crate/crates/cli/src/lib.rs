//! Library side of the `szego` command: run files, suite dispatch,
//! point evaluation and fixture freezing.

pub mod eval;
pub mod freeze;
pub mod spec;
pub mod suites;

use std::path::Path;

use serde::{Deserialize, Serialize};
use szego_core::identities::{IdentityReport, InstanceRecord};

use crate::spec::{PolicyEcho, PolicySpec, RunSpec};
use crate::suites::{run_suite, SuiteContext};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_EVAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Spec(String),
    #[error(transparent)]
    Eval(#[from] szego_core::Error),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => EXIT_SPEC,
            CliError::Eval(_) | CliError::Output { .. } => EXIT_EVAL,
        }
    }

    /// Short machine-readable kind, e.g. `OnThetaDivisor`.
    pub fn kind(&self) -> String {
        match self {
            CliError::Spec(_) => "InvalidInput".into(),
            CliError::Output { .. } => "Output".into(),
            CliError::Eval(e) => {
                let debug = format!("{e:?}");
                debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
            }
        }
    }

    /// JSON object written to the error stream.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

/// One entry of a verification report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub suite: String,
    pub identity_name: String,
    pub instances: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub policy: PolicyEcho,
    pub records: Vec<InstanceRecord>,
}

impl ReportEntry {
    pub fn new(suite: &str, report: IdentityReport, policy: PolicyEcho) -> Self {
        Self {
            suite: suite.to_string(),
            identity_name: report.identity_name,
            instances: report.instances,
            max_abs_error: report.max_abs_error,
            max_rel_error: report.max_rel_error,
            tolerance: report.tolerance,
            passed: report.passed,
            seed: report.seed,
            policy,
            records: report.records,
        }
    }
}

/// Runs every selected suite of `spec`. Policy layers, lowest first: the
/// file named by `SZEGO_POLICY`, the spec's `policy`, then `overrides`.
pub fn verify(spec: &RunSpec, overrides: PolicySpec) -> Result<Vec<ReportEntry>, CliError> {
    let policy = overrides.over(spec.policy.over(spec::env_policy()?)).resolve()?;
    let run = spec.resolve(&policy)?;
    let ctx = SuiteContext { curve: &run.curve, bundle: run.bundle.as_ref(), policy: &policy };
    let echo = PolicyEcho::from(&policy);
    let mut entries = Vec::new();
    for (suite, s) in &run.suites {
        for report in run_suite(*suite, &ctx, s.instances, s.tolerance)? {
            entries.push(ReportEntry::new(suite.name(), report, echo));
        }
    }
    Ok(entries)
}

pub fn all_passed(entries: &[ReportEntry]) -> bool {
    entries.iter().all(|e| e.passed)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
