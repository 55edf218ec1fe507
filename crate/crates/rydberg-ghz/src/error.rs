use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for {n_atoms} atoms")]
    SiteOutOfRange { site: usize, n_atoms: usize },
    #[error("sites must be distinct, got {0} twice")]
    OverlappingSites(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("dimension {0} is not a power of 3")]
    NotPowerOfThree(usize),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid stage: {0}")]
    InvalidStage(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("synthesis infeasible: {0}")]
    Infeasible(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("adaptive step underflow at t = {t:e}")]
    StepUnderflow { t: f64 },
    #[error("passage condition violated: residual {residual:e} exceeds {threshold:e}")]
    ConditionViolated { residual: f64, threshold: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure at {point}: {source}")]
    GridPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
