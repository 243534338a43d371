use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("network support graph is not strongly connected")]
    Disconnected,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("noise density integrates to {integral}, expected 1")]
    NoiseNormalization { integral: f64 },
    #[error("operation requires mean-zero noise, noise mean is {0}")]
    BiasedNoise(f64),
    #[error("state has a non-finite entry at coordinate {0}")]
    NonFinite(usize),
    #[error("coordinate {0} is not strictly positive")]
    NonPositive(usize),
    #[error("the two sphere states coincide")]
    IdenticalStates,
    #[error("estimated alpha {alpha_hat} is nonnegative (standard error {std_error})")]
    NonNegativeAlpha { alpha_hat: f64, std_error: f64 },
    #[error("operation is specialized to {0}")]
    Unsupported(&'static str),
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("triangular coupling matrix is singular")]
    SingularCoupling,
    #[error("too few replicas: need at least {min}, got {got}")]
    TooFewReplicas { min: usize, got: usize },
    #[error("empty radius grid")]
    EmptyRadiusGrid,
}
