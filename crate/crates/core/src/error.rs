use thiserror::Error;

use crate::graded::Sector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sector mismatch: expected {expected}, found {found}")]
    SectorMismatch { expected: Sector, found: Sector },

    #[error("operation requires the vacuum (algebra) sector, found {0}")]
    AlgebraSectorRequired(Sector),

    #[error("operation requires a momentum (module) sector")]
    ModuleSectorRequired,

    #[error("requires floating mode: exact scaling of non-integer weight {weight} by {factor}")]
    RequiresFloatingMode { weight: String, factor: String },

    #[error("exact mode requires a rational scale factor")]
    ExactModeNeedsRational,

    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(String),

    #[error("point {0} is outside the configuration space")]
    NotInConfigurationSpace(String),

    #[error("invalid disk: {0}")]
    InvalidDisk(String),

    #[error("degenerate sewing geometry: {0}")]
    DegenerateSewingGeometry(String),

    #[error("pole bound violated: {0}")]
    PoleBoundViolated(String),

    #[error("arity mismatch: functional expects {expected} variables, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("unsupported insertion: {0}")]
    UnsupportedInsertion(String),

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("evaluation route unavailable: {0}")]
    RouteUnavailable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid specification: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
