//! Dense linear-algebra primitives shared by the rest of the crate:
//! symmetric square roots, orthonormal bases and complements, and
//! principal angles between subspaces.
//!
//! Everything here is a pure function of its inputs. Problem sizes are
//! small (tens of dimensions), so all decompositions are direct.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold for numerical-rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative eigenvalue threshold below which an inverse is refused.
const CONDITION_FLOOR: f64 = 1e-12;

/// A symmetric positive-semidefinite matrix.
///
/// Construction validates symmetry (up to round-off) and the eigenvalue
/// floor, then stores the exactly symmetrized matrix, so downstream
/// decompositions never see asymmetry noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    mat: DMatrix<f64>,
}

impl PsdMatrix {
    /// Validate and wrap a symmetric PSD matrix.
    ///
    /// Symmetry tolerance is `1e-10 * (1 + max|S|)`; eigenvalues may dip to
    /// `-1e-8 * lambda_max` to absorb round-off from upstream estimation.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: mat.nrows(),
                actual: mat.ncols(),
            });
        }
        let max_abs = mat.amax();
        let tolerance = 1e-10 * (1.0 + max_abs);
        let mut asymmetry = 0.0f64;
        for i in 0..mat.nrows() {
            for j in (i + 1)..mat.ncols() {
                asymmetry = asymmetry.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric {
                asymmetry,
                tolerance,
            });
        }
        let sym = symmetrize(&mat);
        let eigenvalues = sym.clone().symmetric_eigen().eigenvalues;
        let lambda_max = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let lambda_min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let floor = 1e-8 * lambda_max;
        if lambda_min < -floor {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: lambda_min,
                tolerance: floor,
            });
        }
        Ok(Self { mat: sym })
    }

    /// Wrap a matrix that is symmetric PSD by construction (e.g. V D V^T
    /// with nonnegative D). Symmetrizes to kill round-off, skips the
    /// eigenvalue scan.
    pub(crate) fn from_symmetric_unchecked(mat: DMatrix<f64>) -> Self {
        Self {
            mat: symmetrize(&mat),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    /// Ridge used when inverting empirical covariances: `1e-8 * trace / dim`.
    pub fn default_ridge(&self) -> f64 {
        1e-8 * self.trace() / self.dim() as f64
    }
}

/// A matrix with orthonormal columns spanning a subspace of R^ambient_dim.
///
/// Zero columns are allowed (the empty subspace).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    basis: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Validate `B^T B = I` within `1e-8` entrywise and wrap.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::DimensionMismatch {
                what: "basis columns (must not exceed ambient dimension)",
                expected: basis.nrows(),
                actual: basis.ncols(),
            });
        }
        let gram = basis.transpose() * &basis;
        let deviation = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).amax();
        if deviation > 1e-8 {
            return Err(Error::NotOrthonormal(deviation));
        }
        Ok(Self { basis })
    }

    pub(crate) fn from_orthonormal_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// The identity basis spanning all of R^dim.
    pub fn full(dim: usize) -> Self {
        Self {
            basis: DMatrix::identity(dim, dim),
        }
    }

    /// The empty basis (zero columns) in R^dim.
    pub fn empty(dim: usize) -> Self {
        Self {
            basis: DMatrix::zeros(dim, 0),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.basis.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

/// Flip column signs so the entry of largest magnitude is positive.
/// Removes the sign ambiguity of eigen/singular vectors so repeated runs
/// are bit-identical.
fn fix_column_signs(mat: &mut DMatrix<f64>) {
    for mut col in mat.column_iter_mut() {
        let mut lead = 0.0f64;
        for &v in col.iter() {
            if v.abs() > lead.abs() {
                lead = v;
            }
        }
        if lead < 0.0 {
            col.neg_mut();
        }
    }
}

/// Symmetric square root: returns `Q` with `Q Q = S + ridge I`.
///
/// Computed spectrally with eigenvalues clamped at zero before the root,
/// so `Q` stays symmetric and mildly negative round-off eigenvalues do not
/// produce NaNs.
pub fn sym_sqrt(s: &PsdMatrix, ridge: f64) -> Result<PsdMatrix> {
    if ridge < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let eig = s.as_matrix().clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| (l.max(0.0) + ridge).sqrt());
    let q = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok(PsdMatrix::from_symmetric_unchecked(q))
}

/// Symmetric inverse square root: returns `W` with `W (S + ridge I) W = I`.
///
/// Fails when `S + ridge I` is numerically singular, reporting the
/// offending eigenvalue.
pub fn sym_inv_sqrt(s: &PsdMatrix, ridge: f64) -> Result<DMatrix<f64>> {
    if ridge < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let eig = s.as_matrix().clone().symmetric_eigen();
    let shifted = eig.eigenvalues.map(|l| l.max(0.0) + ridge);
    let largest = shifted.iter().cloned().fold(0.0f64, f64::max);
    let smallest = shifted.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = CONDITION_FLOOR * largest;
    if smallest.is_nan() || smallest <= threshold {
        return Err(Error::IllConditioned {
            smallest,
            threshold,
            context: "matrix for inverse square root".to_string(),
        });
    }
    let inv_roots = shifted.map(|l| 1.0 / l.sqrt());
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_roots) * eig.eigenvectors.transpose();
    Ok(symmetrize(&w))
}

/// Orthonormal basis of the column space of `a`.
///
/// Numerical rank keeps singular values `>= rank_tol * sigma_max`.
pub fn orthonormal_basis(a: &DMatrix<f64>, rank_tol: f64) -> Result<OrthonormalBasis> {
    let svd = a.clone().svd(true, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max < 1e-14 {
        return Err(Error::ZeroMatrix(sigma_max));
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s >= rank_tol * sigma_max)
        .count();
    let u = svd.u.expect("left singular vectors requested");
    let mut basis = u.columns(0, rank).into_owned();
    fix_column_signs(&mut basis);
    Ok(OrthonormalBasis::from_orthonormal_unchecked(basis))
}

/// Orthonormal basis of the orthogonal complement of `span(B)`.
///
/// Built from the spectral decomposition of the projector `I - B B^T`:
/// its unit eigenvalues mark exactly the complement directions.
pub fn orthonormal_complement(b: &OrthonormalBasis) -> Result<OrthonormalBasis> {
    let n = b.ambient_dim();
    let m = b.num_cols();
    if m == n {
        return Err(Error::EmptyComplement(n));
    }
    let projector = DMatrix::identity(n, n) - b.as_matrix() * b.as_matrix().transpose();
    let eig = symmetrize(&projector).symmetric_eigen();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n - m);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.5 {
            columns.push(eig.eigenvectors.column(idx).into_owned());
        }
    }
    if columns.len() != n - m {
        return Err(Error::InvalidInput(format!(
            "complement rank {} does not match expected {}",
            columns.len(),
            n - m
        )));
    }
    let mut complement = DMatrix::from_columns(&columns);
    fix_column_signs(&mut complement);
    Ok(OrthonormalBasis::from_orthonormal_unchecked(complement))
}

/// Largest principal angle between two subspaces, via the sine route:
/// `asin` of the largest singular value of `(I - B1 B1^T) B2` (with the
/// narrower basis in the `B2` slot).
///
/// [`principal_angles`] computes `acos` of overlap singular values, which
/// cannot resolve angles below ~2e-8 in double precision; this form stays
/// accurate down to round-off and is what tight span-equality checks
/// should use.
pub fn max_principal_angle(b1: &OrthonormalBasis, b2: &OrthonormalBasis) -> Result<f64> {
    if b1.ambient_dim() != b2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "ambient dimension of the two bases",
            expected: b1.ambient_dim(),
            actual: b2.ambient_dim(),
        });
    }
    let (wide, narrow) = if b1.num_cols() >= b2.num_cols() {
        (b1, b2)
    } else {
        (b2, b1)
    };
    if narrow.num_cols() == 0 {
        return Ok(0.0);
    }
    let overlap = wide.as_matrix().transpose() * narrow.as_matrix();
    let residual = narrow.as_matrix() - wide.as_matrix() * overlap;
    let sine = residual
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    Ok(sine.clamp(0.0, 1.0).asin())
}

/// Principal angles between `span(B1)` and `span(B2)`, in radians,
/// ascending. Angles are `acos` of the singular values of `B1^T B2`,
/// clamped into [0, 1] first.
///
/// The overlap matrix is built in a canonical orientation so that swapping
/// the arguments reproduces the identical floating-point computation:
/// `acos` near 1 would otherwise amplify the round-off difference between
/// the SVD of a matrix and of its transpose into visible angle asymmetry.
pub fn principal_angles(b1: &OrthonormalBasis, b2: &OrthonormalBasis) -> Result<Vec<f64>> {
    if b1.ambient_dim() != b2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "ambient dimension of the two bases",
            expected: b1.ambient_dim(),
            actual: b2.ambient_dim(),
        });
    }
    if b1.num_cols() == 0 || b2.num_cols() == 0 {
        return Ok(Vec::new());
    }
    let swap = match b1.num_cols().cmp(&b2.num_cols()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        // equal widths: orient lexicographically (bases carry no NaNs)
        std::cmp::Ordering::Equal => b1.as_matrix().as_slice() > b2.as_matrix().as_slice(),
    };
    let (first, second) = if swap { (b2, b1) } else { (b1, b2) };
    let overlap = first.as_matrix().transpose() * second.as_matrix();
    let svd = overlap.svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0).acos())
        .collect())
}
