use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("zero vector cannot be normalised")]
    ZeroVector,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("B = {0} lies outside (1/16, 1/12]")]
    OutOfRange(f64),
    #[error("cannot parse overlap value {0:?}")]
    BadOverlap(String),
    #[error("POVM element {index} is not rank one (second eigenvalue {eigenvalue:.3e})")]
    NotRankOne { index: usize, eigenvalue: f64 },
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("probability {0:.3e} is negative beyond rounding")]
    NegativeProbability(f64),
    #[error("invalid coin schedule: {0}")]
    InvalidSchedule(String),
    #[error("compilation failed, residual {0:.3e}")]
    CompilationFailed(f64),
    #[error("unitary not reachable with the given plates (residual {0:.3e})")]
    TemplateInsufficient(f64),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("witness fit failed: {0}")]
    FitFailed(String),
}
