use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 2 and at most {max}, got {n}")]
    InvalidDimension { n: usize, max: usize },

    #[error("chamber point invalid: {0}")]
    ChamberPoint(String),

    #[error("reflection closure produced {found} elements, expected {expected}")]
    GroupClosure { expected: usize, found: usize },

    #[error("metric system is numerically singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("solved Hamiltonian is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("no admissible perturbation strength found, even 1e-6 fails")]
    ThresholdNotFound,

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("trajectory did not leave the bounding sphere before t = {t}")]
    EscapeFailure { t: f64 },

    #[error("geometry conditions violated: {0}")]
    GeometryInvalid(String),

    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error(
        "amplitudes are degenerate for pair ({k}, {l}): a_kl = {a_kl} equals a_k - a_l = {diff}"
    )]
    AmplitudeDegenerate { k: usize, l: usize, a_kl: f64, diff: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension { .. } => "InvalidDimension",
            Error::ChamberPoint(_) => "ChamberPoint",
            Error::GroupClosure { .. } => "GroupClosure",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::ThresholdNotFound => "ThresholdNotFound",
            Error::StepFailure { .. } => "StepFailure",
            Error::EscapeFailure { .. } => "EscapeFailure",
            Error::GeometryInvalid(_) => "GeometryInvalid",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::AmplitudeDegenerate { .. } => "AmplitudeDegenerate",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
