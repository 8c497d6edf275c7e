use thiserror::Error;

/// Errors raised anywhere in the simulation and estimation chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("microwave resonance: {0}")]
    Resonance(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("filter design error: {0}")]
    FilterDesign(String),

    #[error("record too short for filter: {0}")]
    Edge(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("ill-conditioned fit: {0}")]
    Conditioning(String),

    #[error("phase reconstruction failed: {0}")]
    Unwrap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// `true` for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Range(_)
                | Error::Aliasing(_)
                | Error::Config(_)
                | Error::Format(_)
                | Error::Io(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range(_) => "range",
            Error::Resonance(_) => "resonance",
            Error::Numeric(_) => "numeric",
            Error::Infeasible(_) => "infeasible",
            Error::Aliasing(_) => "aliasing",
            Error::FilterDesign(_) => "filter_design",
            Error::Edge(_) => "edge",
            Error::Calibration(_) => "calibration",
            Error::Conditioning(_) => "conditioning",
            Error::Unwrap(_) => "unwrap",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
