use thiserror::Error;

use crate::fields::FieldError;
use crate::geometry::GeometryError;
use crate::inversion::InversionError;
use crate::raytrace::RayError;
use crate::response::ResponseError;
use crate::snapshot::SnapshotError;
use crate::solver::SolverError;

/// Any failure of the library, with the classification the command line
/// maps to exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Validation,
    BlowUp,
    Detection,
    Other,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Validation => 2,
            Category::BlowUp => 3,
            Category::Detection => 4,
            Category::Other => 1,
        }
    }
}

fn solver_category(e: &SolverError) -> Category {
    match e {
        SolverError::BlowUp { .. } => Category::BlowUp,
        SolverError::Field(_) | SolverError::Geometry(_) | SolverError::Invalid { .. } => Category::Validation,
        _ => Category::Other,
    }
}

fn ray_category(e: &RayError) -> Category {
    match e {
        RayError::NoIntersection => Category::Detection,
        RayError::Geometry(_) => Category::Validation,
        _ => Category::Validation,
    }
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: &str) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Geometry(_) | Error::Field(_) | Error::Invalid { .. } | Error::Parse(_) => Category::Validation,
            Error::Ray(r) => ray_category(r),
            Error::Solver(s) => solver_category(s),
            Error::Response(r) => match r {
                ResponseError::Solver(s) | ResponseError::Corner { source: s, .. } => solver_category(s),
                ResponseError::NoStableAmplitude => Category::BlowUp,
                ResponseError::Invalid { .. } => Category::Validation,
            },
            Error::Inversion(i) => match i {
                InversionError::Ray(r) => ray_category(r),
                InversionError::Response(r) => Error::Response(r.clone()).category(),
                InversionError::Invalid { .. } => Category::Validation,
                _ => Category::Detection,
            },
            Error::Snapshot(_) => Category::Validation,
            Error::Io(_) => Category::Other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    /// Short machine-readable name of the failure.
    pub fn kind(&self) -> String {
        let dbg = match self {
            Error::Geometry(e) => format!("{e:?}"),
            Error::Ray(e) => format!("{e:?}"),
            Error::Field(e) => format!("{e:?}"),
            Error::Solver(e) => format!("{e:?}"),
            Error::Response(ResponseError::Solver(e)) | Error::Response(ResponseError::Corner { source: e, .. }) => {
                format!("{e:?}")
            }
            Error::Response(e) => format!("{e:?}"),
            Error::Inversion(e) => format!("{e:?}"),
            Error::Snapshot(e) => format!("{e:?}"),
            Error::Invalid { .. } => "Invalid".into(),
            Error::Parse(_) => "Parse".into(),
            Error::Io(_) => "Io".into(),
        };
        dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
    }

    /// Configuration field the error refers to, when known.
    pub fn field(&self) -> Option<String> {
        match self {
            Error::Invalid { field, .. } => Some(field.clone()),
            Error::Field(f) | Error::Solver(SolverError::Field(f)) => f.field().map(str::to_string),
            Error::Solver(SolverError::Invalid { field, .. }) => Some(field.clone()),
            Error::Response(ResponseError::Invalid { field, .. }) => Some(field.clone()),
            Error::Inversion(InversionError::Invalid { field, .. }) => Some(field.clone()),
            Error::Geometry(_) | Error::Solver(SolverError::Geometry(_)) => Some("metric".into()),
            _ => None,
        }
    }
}
