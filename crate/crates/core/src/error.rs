use std::fmt;

use thiserror::Error;

/// Machine-readable validation codes surfaced by problem construction and file loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationCode {
    DimensionMismatch,
    RankDeficient,
    InfeasibleInit,
    InitNotInterior,
    BadCone,
    UnknownObjective,
    BadParams,
}

impl ValidationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValidationCode::DimensionMismatch => "dimension_mismatch",
            ValidationCode::RankDeficient => "rank_deficient",
            ValidationCode::InfeasibleInit => "infeasible_init",
            ValidationCode::InitNotInterior => "init_not_interior",
            ValidationCode::BadCone => "bad_cone",
            ValidationCode::UnknownObjective => "unknown_objective",
            ValidationCode::BadParams => "bad_params",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is not in the interior of cone block {block}")]
    NotInterior { block: usize },

    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("cubic model is singular: {0}")]
    SingularModel(String),

    #[error("cubic secular equation did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("no strictly feasible initial point was supplied")]
    NoInitialPoint,

    #[error("{what} exceeded {limit} iterations")]
    MaxIterExceeded { what: &'static str, limit: usize },

    #[error("line search at iteration {iteration} exceeded {limit} trials")]
    MaxInner { iteration: usize, limit: usize },

    #[error("objective oracle returned a non-finite value at iteration {iteration}: {detail}")]
    ObjectiveFailure { iteration: usize, detail: String },

    #[error("objective provides no Hessian action")]
    NoSecondOrderOracle,

    #[error("validation failed [{code}]: {message}")]
    Validation {
        code: ValidationCode,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(code: ValidationCode, message: impl Into<String>) -> Self {
        Error::Validation {
            code,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
