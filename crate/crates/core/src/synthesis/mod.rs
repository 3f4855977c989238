// SPDX-License-Identifier: Apache-2.0

//! Synthesis backends behind one interface.
//!
//! [`MockBackend`] is a pure cost model (with an exact fixture table) for
//! tests and desk-scale runs. [`ExternalBackend`] drives any command-line
//! flow through a command template and report-parsing regexes.

mod external;
mod metrics;
mod mock;
mod structure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ExternalBackend, ExternalConfig, ReportUnits};
pub use metrics::{
    compare, Attribute, Comparison, Outcome, PpaMetrics, SynthesisConstraints,
};
pub use mock::{heuristic_features, HeuristicFeatures, MockBackend, MOCK_BACKEND_ID};
pub use structure::check_structure;

use crate::corpus::VerilogModule;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("synthesis backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("measurement failed: {0}")]
    MeasurementFailed(String),
    #[error("metrics are not comparable: {0}")]
    IncomparableMetrics(String),
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// Result of a syntax/synthesizability check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum Validation {
    Ok(Vec<String>),
    SyntaxError(String),
    Unsynthesizable(String),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok(_))
    }

    pub fn diagnostic(&self) -> String {
        match self {
            Validation::Ok(d) => d.join("; "),
            Validation::SyntaxError(d) => format!("syntax error: {d}"),
            Validation::Unsynthesizable(d) => format!("not synthesizable: {d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub validates_syntax: bool,
    pub reports_area: bool,
    pub reports_power: bool,
    pub reports_delay: bool,
    pub check_equivalence: bool,
    /// Concurrent `measure` calls the backend tolerates.
    pub max_parallelism: usize,
}

pub trait SynthesisBackend: Send + Sync {
    /// Provenance tag stamped on every metric this backend produces.
    fn id(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    fn validate(&self, module: &VerilogModule) -> Result<Validation, SynthesisError>;

    fn measure(
        &self,
        module: &VerilogModule,
        constraints: &SynthesisConstraints,
    ) -> Result<PpaMetrics, SynthesisError>;

    /// Functional equivalence, for adapters that can prove it.
    fn check_equivalence(
        &self,
        _original: &VerilogModule,
        _candidate: &VerilogModule,
    ) -> Option<Result<bool, SynthesisError>> {
        None
    }
}

/// Validate, then measure. A failed validation becomes `MeasurementFailed`.
pub fn validate_and_measure(
    backend: &dyn SynthesisBackend,
    module: &VerilogModule,
    constraints: &SynthesisConstraints,
) -> Result<PpaMetrics, SynthesisError> {
    match backend.validate(module)? {
        Validation::Ok(_) => backend.measure(module, constraints),
        other => Err(SynthesisError::MeasurementFailed(other.diagnostic())),
    }
}
