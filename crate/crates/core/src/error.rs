use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point} does not belong to the {domain} domain")]
    PointOutsideDomain { point: String, domain: &'static str },

    #[error("λ = {lambda} lies outside the spectral interval [0, {kappa_sq}]")]
    OutOfSpectralRange { lambda: f64, kappa_sq: f64 },

    #[error("filter {descriptor} has a negative increment {value:e} at j = {j}, λ = {lambda}")]
    BrokenFamily {
        descriptor: String,
        j: u64,
        lambda: f64,
        value: f64,
    },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("eigendirection {index} is in the numerical null space (rank {rank})")]
    NullEigendirection { index: usize, rank: usize },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("{excluded:e} of the squared norm lies in excluded spectral components")]
    NotRepresentable { excluded: f64 },

    #[error("quadrature grid of {got} points is below the minimum of {min}")]
    QuadratureTooSmall { got: usize, min: usize },

    #[error("need at least {needed} modes with positive eigenvalue, only {available} available")]
    NotEnoughModes { needed: usize, available: usize },

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
