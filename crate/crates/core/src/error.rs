use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: usize },
    #[error("channel count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("grid too coarse for finite differences (n_r = {0}, need >= 3)")]
    TooCoarse(usize),
    #[error("singular system (pivot {pivot} vanished); 0 is (close to) a Dirichlet eigenvalue")]
    Singular { pivot: usize },
    #[error("near-singular operator: min singular value {sigma:.3e} <= threshold {threshold:.3e}")]
    NearEigenvalue { sigma: f64, threshold: f64 },
    #[error("inverse iteration did not converge after {0} steps")]
    NoConvergence(usize),
    #[error("contraction failed: measured delta = {0:.4}")]
    Contraction(f64),
    #[error("exponent real part {0:.1} exceeds overflow guard")]
    Overflow(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rate fit needs >= 6 positive samples: {0}")]
    BadSamples(String),
    #[error("boundary traces do not match the DtN map")]
    BoundaryMismatch,
    #[error("z0 = {0} lies inside the boundary layer")]
    InsideLayer(String),
    #[error("potential generation failed after {0} attempts")]
    PotentialRejected(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
