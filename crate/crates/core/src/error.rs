use thiserror::Error;

/// Broad error categories, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input, bad configuration or violated precondition.
    Validation,
    /// A numerical routine failed (integrator, steady-state solve, invariant check).
    Numerical,
    /// Filesystem or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("operator `{which}` is not defined for mode `{label}`")]
    ModeKindMismatch { label: String, which: &'static str },

    #[error("duplicate mode label `{0}`")]
    LabelCollision(String),

    #[error("operands live on different Hilbert spaces")]
    SpaceMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("vacuum-dominated state, g² undefined (occupation {occupation:e})")]
    VacuumDominated { occupation: f64 },

    #[error("operator annihilates the state (norm {norm:e})")]
    AnnihilatedState { norm: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("integrator step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("non-unique steady state")]
    NonUniqueSteadyState,

    #[error("steady-state solve failed: {0}")]
    SteadyState(String),

    #[error("truncation leakage {mass:e} exceeds {limit:e}")]
    TruncationLeakage { mass: f64, limit: f64 },

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("{failed} of {total} sweep points failed: {summary}")]
    SweepFailures {
        failed: usize,
        total: usize,
        summary: String,
    },

    #[error("sample {id}: {source}")]
    Sample {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn with_sample(self, id: usize) -> Self {
        Error::Sample {
            id,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::UnknownMode(_)
            | Error::ModeKindMismatch { .. }
            | Error::LabelCollision(_)
            | Error::SpaceMismatch
            | Error::InvalidInput(_)
            | Error::InvalidField { .. }
            | Error::DimensionMismatch { .. }
            | Error::UnknownName { .. } => ErrorKind::Validation,
            Error::VacuumDominated { .. }
            | Error::AnnihilatedState { .. }
            | Error::NonFinite(_)
            | Error::StepUnderflow { .. }
            | Error::InvariantViolation(_)
            | Error::NonUniqueSteadyState
            | Error::SteadyState(_)
            | Error::TruncationLeakage { .. }
            | Error::ZeroDenominator(_)
            | Error::SweepFailures { .. } => ErrorKind::Numerical,
            Error::Sample { source, .. } => source.kind(),
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
