use std::fmt;

use serde::Serialize;

/// A single broken invariant found while validating a group description.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    NonOrthogonal { index: usize, defect: f64 },
    NonSkew { index: usize, defect: f64 },
    BadWeights { detail: String },
    MissingIdentity,
    Shape { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonOrthogonal { index, defect } => {
                write!(f, "NonOrthogonal: finite element {index} has |QtQ - I| = {defect:e}")
            }
            Violation::NonSkew { index, defect } => {
                write!(f, "NonSkew: algebra element {index} has |X + Xt| = {defect:e}")
            }
            Violation::BadWeights { detail } => write!(f, "BadWeights: {detail}"),
            Violation::MissingIdentity => write!(f, "MissingIdentity: identity is not a finite element"),
            Violation::Shape { detail } => write!(f, "Shape: {detail}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid group: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGroup(Vec<Violation>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rank ambiguous at {point:?}: singular value ratio {ratio:e} inside the ambiguity band")]
    RankAmbiguous { point: Vec<f64>, ratio: f64 },
    #[error("no chart contains the image point: {0}")]
    ChartExit(String),
    #[error("center not recognized: {0}")]
    CenterNotRecognized(String),
    #[error("center not saturated: defect {defect:e}")]
    CenterNotSaturated { defect: f64 },
    #[error("tube radius {rho} too large (limit {limit})")]
    TubeTooLarge { rho: f64, limit: f64 },
    #[error("stage limit {0} exceeded before the action became regular")]
    StageLimitExceeded(usize),
    #[error("matrix not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },
    #[error("splitting frame degenerate: {0}")]
    FrameDegenerate(String),
    #[error("submersion precondition failed: defect {0:e}")]
    SubmersionPreconditionFailed(f64),
    #[error("unsupported group for this operation: {0}")]
    UnsupportedGroup(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("orbit graph disconnected ({components} components); increase k or the sample count")]
    GraphDisconnected { components: usize },
    #[error("exact Gromov-Hausdorff limited to 8 points per space, got {0}")]
    TooLargeForExact(usize),
    #[error("unknown report kind: {0}")]
    UnknownReportKind(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGroup(_) => "InvalidGroup",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::RankAmbiguous { .. } => "RankAmbiguous",
            Error::ChartExit(_) => "ChartExit",
            Error::CenterNotRecognized(_) => "CenterNotRecognized",
            Error::CenterNotSaturated { .. } => "CenterNotSaturated",
            Error::TubeTooLarge { .. } => "TubeTooLarge",
            Error::StageLimitExceeded(_) => "StageLimitExceeded",
            Error::NotSpd { .. } => "NotSPD",
            Error::FrameDegenerate(_) => "FrameDegenerate",
            Error::SubmersionPreconditionFailed(_) => "SubmersionPreconditionFailed",
            Error::UnsupportedGroup(_) => "UnsupportedGroup",
            Error::Unsupported(_) => "Unsupported",
            Error::GraphDisconnected { .. } => "GraphDisconnected",
            Error::TooLargeForExact(_) => "TooLargeForExact",
            Error::UnknownReportKind(_) => "UnknownReportKind",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGroup(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::UnknownReportKind(_)
            | Error::UnsupportedGroup(_)
            | Error::Unsupported(_)
            | Error::TubeTooLarge { .. }
            | Error::CenterNotSaturated { .. } => 1,
            Error::RankAmbiguous { .. }
            | Error::NotSpd { .. }
            | Error::FrameDegenerate(_)
            | Error::ChartExit(_)
            | Error::CenterNotRecognized(_)
            | Error::SubmersionPreconditionFailed(_)
            | Error::GraphDisconnected { .. } => 2,
            Error::StageLimitExceeded(_) | Error::TooLargeForExact(_) => 3,
        }
    }

    /// Structured context for the error object printed on stderr.
    pub fn context(&self) -> serde_json::Value {
        match self {
            Error::InvalidGroup(v) => serde_json::json!({ "violations": v }),
            Error::RankAmbiguous { point, ratio } => serde_json::json!({ "point": point, "ratio": ratio }),
            Error::NotSpd { min_eigenvalue } => serde_json::json!({ "min_eigenvalue": min_eigenvalue }),
            Error::DimensionMismatch { expected, got } => {
                serde_json::json!({ "expected": expected, "got": got })
            }
            _ => serde_json::Value::Null,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
