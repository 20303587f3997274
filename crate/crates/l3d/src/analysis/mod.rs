//! Everything done with a learned basis: interventions, impact scores,
//! coefficient recovery, encoder alignment, and subnetwork-feature matching.

pub mod alignment;
pub mod assignment;
pub mod coefficients;
pub mod impact;
pub mod intervention;

use std::fmt;

use crate::decomp::DecompError;
use crate::models::ModelError;

pub use alignment::cosine_alignment;
pub use assignment::{match_subnetworks, Assignment};
pub use coefficients::{coefficient_r2, extract_coefficients, CoefficientEstimate};
pub use impact::{impact, mean_impact, most_affected_outputs, top_samples, ImpactTable};
pub use intervention::{intervene, intervention_sweep, pair_intervention_grid, InterventionResult};

/// Errors from analysis operations.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    Shape(String),
    Input(String),
    ZeroNorm(String),
    Model(ModelError),
    Decomp(DecompError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::Shape(msg) => write!(f, "shape error: {msg}"),
            AnalysisError::Input(msg) => write!(f, "invalid input: {msg}"),
            AnalysisError::ZeroNorm(what) => write!(f, "zero-norm {what}"),
            AnalysisError::Model(e) => write!(f, "{e}"),
            AnalysisError::Decomp(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for AnalysisError {}

impl From<ModelError> for AnalysisError {
    fn from(e: ModelError) -> Self {
        AnalysisError::Model(e)
    }
}

impl From<DecompError> for AnalysisError {
    fn from(e: DecompError) -> Self {
        AnalysisError::Decomp(e)
    }
}
