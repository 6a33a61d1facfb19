use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension for {field}: must be at least 1")]
    InvalidDimension { field: &'static str },

    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("negative value in {field}")]
    NegativeValue { field: &'static str },

    #[error("non-finite value in {field}")]
    NonFinite { field: &'static str },

    #[error("noise_var must be strictly positive")]
    NonPositiveNoise,

    #[error("operation requires num_rx_antennas = {expected}, found {found}")]
    WrongAntennaCount { expected: usize, found: usize },

    #[error("receive beamformer is the zero vector")]
    DegenerateBeamformer,

    #[error("estimated channel of device {wd} is zero")]
    DegenerateChannel { wd: usize },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("all transmit coefficients are zero")]
    ZeroCoefficients,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
