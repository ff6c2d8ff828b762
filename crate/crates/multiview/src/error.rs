//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by model construction, decompositions and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix violates the symmetry tolerance.
    #[error(
        "matrix is not symmetric: max |S[i,j] - S[j,i]| = {asymmetry:.3e} exceeds {tolerance:.3e}"
    )]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    /// Input matrix has an eigenvalue below the negative floor allowed for
    /// round-off noise.
    #[error(
        "matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} below -{tolerance:.3e}"
    )]
    NotPositiveSemidefinite { eigenvalue: f64, tolerance: f64 },

    /// A matrix whose inverse (or inverse square root) is required is too
    /// close to singular.
    #[error(
        "{context} is ill-conditioned: smallest eigenvalue {smallest:.3e} below {threshold:.3e}"
    )]
    IllConditioned {
        smallest: f64,
        threshold: f64,
        context: String,
    },

    /// Columns of the claimed orthonormal basis are not orthonormal.
    #[error("basis columns are not orthonormal: max |B^T B - I| = {0:.3e}")]
    NotOrthonormal(f64),

    /// Every singular value of the input is numerically zero.
    #[error("matrix is numerically zero: largest singular value {0:.3e}")]
    ZeroMatrix(f64),

    /// Orthonormal complement requested for a basis that already spans the
    /// whole space.
    #[error("basis already spans the full {0}-dimensional space; complement is empty")]
    EmptyComplement(usize),

    /// Shapes of the inputs do not line up.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Catch-all for invalid arguments (out-of-range k, negative ridge, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough rows to estimate the requested quantity.
    #[error("insufficient data: need at least {required} rows, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    /// The embedded direction matrix of a three-view fit is rank deficient,
    /// so the discarded subspace cannot be identified.
    #[error(
        "degenerate model: embedded direction matrix is rank deficient \
         (singular value ratio {margin:.3e} below {threshold:.3e})"
    )]
    DegenerateModel { margin: f64, threshold: f64 },

    /// Least-squares design matrix is rank deficient and no ridge was given.
    #[error("singular design matrix: add a ridge penalty or more samples")]
    SingularDesign,

    /// Configuration file or flag combination is invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Filesystem failure while writing results.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
