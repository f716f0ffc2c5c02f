use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error("mesh too coarse")]
    MeshTooCoarse,
    #[error("inconsistent geometry: {0}")]
    InconsistentGeometry(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("alpha too large for R")]
    AlphaTooLarge,
    #[error("ball overlaps Omega")]
    BallOverlapsOmega,
    #[error("out of range")]
    OutOfRange,
    #[error("problem too large: {0}")]
    ProblemTooLarge(String),
    #[error("bad vector length: expected {expected}, got {got}")]
    BadVectorLength { expected: usize, got: usize },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("violates Dirichlet constraint")]
    ViolatesDirichlet,
    #[error("empty Dirichlet set")]
    EmptyDirichletSet,
    #[error("local reference is 1D only")]
    LocalReferenceIs1dOnly,
    #[error("mask touches Omega")]
    MaskTouchesOmega,
}

pub type Result<T> = std::result::Result<T, Error>;
