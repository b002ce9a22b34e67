use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector norm is below 1e-12 and cannot be normalized")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),

    #[error("vector is not unit norm (|v| = {0})")]
    NotUnitNorm(f64),

    #[error("vectors are collinear (|<x, z>| = {0}); no unique plane")]
    DegeneratePlane(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mechanism spec: {0}")]
    InvalidSpec(String),

    #[error("rejection sampler exceeded {0} iterations")]
    RejectionLimit(usize),

    #[error("need more than {needed} references, got {found}")]
    InsufficientReferences { needed: usize, found: usize },

    #[error("covariance rank is below the requested target dimension {0}")]
    DegenerateCovariance(usize),

    #[error("identity {identity} has {available} samples, need more than {requested}")]
    InsufficientSamples {
        identity: u64,
        available: usize,
        requested: usize,
    },

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("score list is empty")]
    EmptyInput,

    #[error("database carries no attribute directions")]
    NoAttributes,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
