//! Leapfrog integration of the linear and semilinear wave equations, the
//! causal solve `Q(f)` and the Picard iteration.

mod energy;
mod linear;
mod semilinear;
mod stencil;
mod stepper;

pub use energy::energy_drift;
pub use linear::solve_linear;
pub use semilinear::{initial_data, picard_solve, solve_semilinear, PicardReport};
pub use stencil::Discretization;
pub use stepper::{Evolution, StepStats, Stepper};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, GridSpec};
use crate::geometry::{GeometryError, Metric};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("solution blew up at step {step} (t = {time}): max |u| = {max_abs:e}")]
    BlowUp { step: usize, time: f64, max_abs: f64 },
    #[error("Picard iteration is not contracting: B_{{m+1}}/B_m = {ratio} at m = {m}")]
    NoContraction { m: usize, ratio: f64 },
    #[error("Picard iteration did not reach the tolerance in {0} iterations")]
    NotConverged(usize),
    #[error("operation needs a full (stride 1) history")]
    NotFullHistory,
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cfl: f64,
    /// Damping layer width in cells; 0 disables it.
    pub sponge_width: usize,
    /// Peak damping rate (1/time); `None` picks `12·c_max/W`.
    pub sponge_strength: Option<f64>,
    /// `None` uses 1e6 × the initial amplitude scale.
    pub blowup_cap: Option<f64>,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    /// Record every `record_stride`-th slice (the last slice always).
    pub record_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            sponge_width: 0,
            sponge_strength: None,
            blowup_cap: None,
            picard_max_iter: 40,
            picard_tol: 1e-10,
            record_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |f: &str, r: &str| Err(SolverError::Invalid { field: f.into(), reason: r.into() });
        if self.record_stride == 0 {
            return bad("solver.record_stride", "must be at least 1");
        }
        if let Some(s) = self.sponge_strength {
            if !(s >= 0.0) {
                return bad("solver.sponge_strength", "must be non-negative");
            }
        }
        if let Some(c) = self.blowup_cap {
            if !(c > 0.0) {
                return bad("solver.blowup_cap", "must be positive");
            }
        }
        if !(self.picard_tol > 0.0) {
            return bad("solver.picard_tol", "must be positive");
        }
        Ok(())
    }
}

/// Operator, damping profile and controls shared by every run on one grid.
#[derive(Debug, Clone)]
pub struct Solver {
    pub op: Arc<Discretization>,
    pub damping: Option<Arc<Vec<f64>>>,
    pub cfg: SolverConfig,
}

impl Solver {
    pub fn new(grid: &GridSpec, m: &Metric, cfg: &SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let op = Arc::new(Discretization::new(grid, m)?);
        let damping = sponge_profile(grid, cfg).map(Arc::new);
        Ok(Self { op, damping, cfg: cfg.clone() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.op.grid
    }

    pub fn with_stride(&self, stride: usize) -> Self {
        let mut s = self.clone();
        s.cfg.record_stride = stride.max(1);
        s
    }
}

/// Quadratic damping ramp `σ = σ_max((W − r)/W)²` inside a layer of width
/// `W` at the box faces, `r` the distance of the cell centre to the face.
pub fn sponge_profile(grid: &GridSpec, cfg: &SolverConfig) -> Option<Vec<f64>> {
    if cfg.sponge_width == 0 {
        return None;
    }
    let w = cfg.sponge_width as f64 * grid.h;
    let peak = cfg.sponge_strength.unwrap_or(12.0 * grid.c_max / w);
    Some(
        (0..grid.len())
            .map(|k| {
                let r = grid.margin(&grid.center(k));
                if r < w {
                    let z = (w - r) / w;
                    peak * z * z
                } else {
                    0.0
                }
            })
            .collect(),
    )
}
