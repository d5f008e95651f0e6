use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A single failed standing condition found while validating inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    AssumptionViolated { name: String, detail: String },
    BudgetAtBreakpoint { cstar: f64, index: usize, breakpoint: f64 },
}

impl Violation {
    pub(crate) fn assumption(name: &str, detail: impl Into<String>) -> Self {
        Violation::AssumptionViolated { name: name.to_string(), detail: detail.into() }
    }

    /// Short machine-friendly name of the violated condition.
    pub fn name(&self) -> &str {
        match self {
            Violation::AssumptionViolated { name, .. } => name,
            Violation::BudgetAtBreakpoint { .. } => "budget_at_breakpoint",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AssumptionViolated { name, detail } => write!(f, "{name}: {detail}"),
            Violation::BudgetAtBreakpoint { cstar, index, breakpoint } => {
                write!(f, "budget c*={cstar} coincides with breakpoint ctilde[{index}]={breakpoint}")
            }
        }
    }
}

/// The complete list of violations found by [`crate::params::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationErrors(pub Vec<Violation>);

impl ValidationErrors {
    pub fn violations(&self) -> &[Violation] {
        &self.0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|v| v.name() == name)
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated condition(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Validation(#[from] ValidationErrors),

    #[error("budget c*={cstar} coincides with a cost breakpoint")]
    BudgetAtBreakpoint { cstar: f64 },

    #[error("transmission rate {b} outside admissible range [{lo}, {hi}]")]
    OutOfRange { b: f64, lo: f64, hi: f64 },

    #[error("non-positive discriminant {disc} at B={b}")]
    DegenerateDiscriminant { b: f64, disc: f64 },

    #[error("sensitivity system is singular at B={b} (det={det})")]
    SingularSystem { b: f64, det: f64 },

    #[error("protocol is not an impartial pairwise comparison: {0}")]
    NotIpc(String),

    #[error("epidemic state outside domain: I={i}, R={r}")]
    EpidemicStateOutOfDomain { i: f64, r: f64 },

    #[error("integration step rejected at t={t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("no grid point is feasible at level alpha={alpha}")]
    AllInfeasible { alpha: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
