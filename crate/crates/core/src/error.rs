use thiserror::Error;

/// Errors raised across the verification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("outside-area: point ({x}, {y}) is not inside the service area")]
    OutsideArea { x: f64, y: f64 },

    #[error("non-positive-distance: {0}")]
    NonPositiveDistance(f64),

    #[error("covariance-not-psd: factorization failed after regularization")]
    CovarianceNotPsd,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate-shadowing: shadowing standard deviation must be positive")]
    DegenerateShadowing,

    #[error("both-densities-zero at attenuation {0}")]
    BothDensitiesZero(f64),

    #[error("empty-class: {0}")]
    EmptyClass(String),

    #[error("training diverged at epoch {epoch} (loss trace: {trace:?})")]
    Divergence { epoch: usize, trace: Vec<f64> },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("optimizer did not converge (best residual {residual})")]
    NonConvergence { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of numerical procedures (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::CovarianceNotPsd
                | Error::Divergence { .. }
                | Error::SingularSystem(_)
                | Error::NonConvergence { .. }
                | Error::BothDensitiesZero(_)
        )
    }
}
