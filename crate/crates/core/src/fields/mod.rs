//! Grids, coefficients, initial pulses, recorded fields and their norms.

mod coefficient;
mod field;
mod grid;
pub(crate) mod norm;
mod pulse;

pub use coefficient::{build_coefficient, build_potential, CoefficientSpec, PotentialSpec, Profile, Region};
pub use field::{DiagRow, WaveField};
pub use grid::{Boundary, GridSpec, MAX_CFL};
pub use norm::{norm, NormKind, Region as NormRegion};
pub use pulse::{build_pulse, SourceSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cfl {0} exceeds the stability limit 0.5")]
    Cfl(f64),
    #[error("pulse support comes within 4σ of the grid boundary")]
    PulseClipped,
    #[error("source covector is not null (|p| = {0:e})")]
    NotNull(f64),
    #[error("array has {got} samples, grid has {want}")]
    ShapeMismatch { got: usize, want: usize },
}

impl FieldError {
    pub(crate) fn invalid(field: &str, reason: &str) -> Self {
        FieldError::Invalid { field: field.into(), reason: reason.into() }
    }

    /// Configuration field the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            FieldError::Invalid { field, .. } => Some(field),
            FieldError::Cfl(_) => Some("grid.cfl"),
            FieldError::PulseClipped | FieldError::NotNull(_) => Some("sources"),
            FieldError::ShapeMismatch { .. } => None,
        }
    }
}
