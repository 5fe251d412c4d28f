use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variants carry the offending name,
/// row, or path so callers can surface them without extra context.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty parameter block")]
    EmptyParameterBlock,

    #[error("duplicate name: {0}")]
    DuplicateName(String),

    #[error("parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unit-cube violation: value {value} at row {row}, column {column}")]
    UnitCubeViolation { row: usize, column: usize, value: f64 },

    #[error("unbounded marginal: parameter {0} has unbounded support")]
    UnboundedMarginal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown model {name}; available: {}", available.join(", "))]
    UnknownModel { name: String, available: Vec<String> },

    #[error("template: {0}")]
    Template(String),

    #[error("gradient evaluation failed at perturbation {0}")]
    Gradient(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("workspace {path} is not writable: {reason}")]
    Workspace { path: PathBuf, reason: String },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("{0}")]
    Estimation(String),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("observations: {0}")]
    Observations(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown method name {name}; available methods: {}", available.join(", "))]
    UnknownMethod { name: String, available: Vec<String> },

    #[error("unknown block type {name} in block {block}; available types: {}", available.join(", "))]
    UnknownBlockType {
        block: String,
        name: String,
        available: Vec<String>,
    },

    #[error("dangling reference: {0}")]
    DanglingReference(String),

    #[error("cycle detected: {0}")]
    Cycle(String),

    #[error("method {method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("checksum mismatch: {0}")]
    Checksum(String),

    #[error("unsupported schema version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the run configuration rather than by
    /// executing it. The CLI maps these to its config-error exit code.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyParameterBlock
                | Error::DuplicateName(_)
                | Error::InvalidParameter { .. }
                | Error::UnknownModel { .. }
                | Error::Config(_)
                | Error::UnknownMethod { .. }
                | Error::UnknownBlockType { .. }
                | Error::DanglingReference(_)
                | Error::Cycle(_)
                | Error::Json(_)
                | Error::UnboundedMarginal(_)
        )
    }
}
