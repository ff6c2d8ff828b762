//! Three-view optimal weighting: fuses the per-view hidden-state
//! estimators into one `k`-dimensional feature map that loses no
//! linear-predictive information.
//!
//! The fit works indirectly. Directions whose projections are uncorrelated
//! with the hidden state are easy to find with two-view CCA: the trailing
//! canonical directions of a stacked view pair against the remaining view
//! carry zero hidden-state covariance. Two such CCAs produce `2k`
//! independent discard directions; mapping them through the covariance
//! square root `Q`, taking the orthogonal complement, and mapping back
//! through `Q^{-1}` yields the kept `k`-dimensional projection `U_1`.
//!
//! Discard directions are embedded over the view rows they act on:
//! the pair `(X^2; X^3)` contributes columns `(0; R_11; R_21)` and the
//! pair `(X^1; X^2)` contributes `(R_12; R_22; 0)`. Any other layout
//! breaks the zero-covariance property the construction rests on.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::cca::{self, CovarianceEstimate, Side};
use crate::error::{Error, Result};
use crate::linalg::{self, OrthonormalBasis, PsdMatrix};
use crate::model::PopulationMoments;

/// Relative singular-value floor below which the embedded discard matrix
/// is declared degenerate.
const DEGENERACY_FLOOR: f64 = 1e-8;

/// The fitted output of the three-view weighting algorithm.
#[derive(Debug, Clone)]
pub struct ThreeViewProjection {
    k: usize,
    u1: DMatrix<f64>,
    q: PsdMatrix,
    r_embedded: DMatrix<f64>,
    p1: OrthonormalBasis,
    p2: OrthonormalBasis,
    r_smallest_singular_value: f64,
    fit_sample_count: usize,
}

/// Numerical witnesses of a fit's quality against exact moments.
#[derive(Debug, Clone)]
pub struct WeightingDiagnostics {
    /// Max |c^T Sigma_XH| over embedded discard columns `c` and hidden
    /// coordinates; near zero iff the discarded subspace really carries no
    /// hidden-state information.
    pub discarded_hidden_covariance_max: f64,
    /// Principal angles between `span(U_1)` and the population-optimal
    /// subspace, when the latter is computable.
    pub principal_angles_to_oracle: Option<Vec<f64>>,
    /// Smallest singular value of the column-normalized embedded discard
    /// matrix; a scale-free margin against degeneracy.
    pub r_rank_margin: f64,
}

/// Run the six-step fit on a `3k x 3k` covariance.
///
/// `ridge` is added to every marginal covariance before whitening and to
/// the square root; use `0` for exact population moments and
/// [`PsdMatrix::default_ridge`] for empirical estimates.
pub fn fit(sigma_xx: &PsdMatrix, k: usize, ridge: f64) -> Result<ThreeViewProjection> {
    fit_with_sample_count(sigma_xx, k, ridge, 0)
}

/// [`fit`] on an empirical covariance estimate, recording its sample count.
pub fn fit_from_estimate(
    est: &CovarianceEstimate,
    k: usize,
    ridge: f64,
) -> Result<ThreeViewProjection> {
    fit_with_sample_count(est.covariance(), k, ridge, est.sample_count())
}

fn fit_with_sample_count(
    sigma_xx: &PsdMatrix,
    k: usize,
    ridge: f64,
    fit_sample_count: usize,
) -> Result<ThreeViewProjection> {
    if k == 0 {
        return Err(Error::InvalidInput("hidden dimension must be >= 1".into()));
    }
    let dim = sigma_xx.dim();
    if dim != 3 * k {
        return Err(Error::DimensionMismatch {
            what: "covariance dimension (must be 3k)",
            expected: 3 * k,
            actual: dim,
        });
    }

    // Step 1: covariance square root.
    let q = linalg::sym_sqrt(sigma_xx, ridge)?;

    // Step 2: trailing canonical directions of (X^2;X^3) against X^1 and of
    // (X^1;X^2) against X^3. The full rotations keep all 2k stacked-pair
    // directions; the last k have the smallest (zero, at the population)
    // correlations.
    let s = sigma_xx.as_matrix();
    let r1 = {
        let aa = PsdMatrix::from_symmetric_unchecked(s.view((0, 0), (k, k)).into_owned());
        let bb = PsdMatrix::from_symmetric_unchecked(s.view((k, k), (2 * k, 2 * k)).into_owned());
        let ab = s.view((0, k), (k, 2 * k)).into_owned();
        let result = cca::cca(&aa, &bb, &ab, ridge)?;
        result.rotation(Side::B).columns(k, k).into_owned()
    };
    let r2 = {
        let aa = PsdMatrix::from_symmetric_unchecked(s.view((2 * k, 2 * k), (k, k)).into_owned());
        let bb = PsdMatrix::from_symmetric_unchecked(s.view((0, 0), (2 * k, 2 * k)).into_owned());
        let ab = s.view((2 * k, 0), (k, 2 * k)).into_owned();
        let result = cca::cca(&aa, &bb, &ab, ridge)?;
        result.rotation(Side::B).columns(k, k).into_owned()
    };

    // Step 3: embed each pair rotation over the view rows it acts on.
    let mut r_embedded = DMatrix::zeros(3 * k, 2 * k);
    r_embedded.view_mut((k, 0), (2 * k, k)).copy_from(&r1);
    r_embedded.view_mut((0, k), (2 * k, k)).copy_from(&r2);

    let r_svd = r_embedded.clone().svd(false, false);
    let r_max = r_svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let r_min = r_svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let margin = if r_max > 0.0 { r_min / r_max } else { 0.0 };
    if margin.is_nan() || margin <= DEGENERACY_FLOOR {
        return Err(Error::DegenerateModel {
            margin,
            threshold: DEGENERACY_FLOOR,
        });
    }

    // Step 4: P2 spans Q * R; orthonormalize since R is merely a basis.
    let p2 = linalg::orthonormal_basis(&(q.as_matrix() * &r_embedded), linalg::DEFAULT_RANK_TOL)?;
    if p2.num_cols() != 2 * k {
        return Err(Error::DegenerateModel {
            margin,
            threshold: DEGENERACY_FLOOR,
        });
    }

    // Step 5: P1 is the orthogonal complement of P2.
    let p1 = linalg::orthonormal_complement(&p2)?;

    // Step 6: solve Q U_1 = P_1 instead of forming Q^{-1}.
    let chol = Cholesky::new(q.as_matrix().clone()).ok_or_else(|| Error::IllConditioned {
        smallest: 0.0,
        threshold: 0.0,
        context: "covariance square root for the final solve".to_string(),
    })?;
    let u1 = chol.solve(p1.as_matrix());

    Ok(ThreeViewProjection {
        k,
        u1,
        q,
        r_embedded,
        p1,
        p2,
        r_smallest_singular_value: r_min,
        fit_sample_count,
    })
}

impl ThreeViewProjection {
    pub fn k(&self) -> usize {
        self.k
    }

    /// The fused `3k x k` projection; `U_1^T x` is the reduced feature.
    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn q(&self) -> &PsdMatrix {
        &self.q
    }

    /// The `3k x 2k` embedded discard directions.
    pub fn r_embedded(&self) -> &DMatrix<f64> {
        &self.r_embedded
    }

    pub fn p1(&self) -> &OrthonormalBasis {
        &self.p1
    }

    pub fn p2(&self) -> &OrthonormalBasis {
        &self.p2
    }

    pub fn r_smallest_singular_value(&self) -> f64 {
        self.r_smallest_singular_value
    }

    /// Rows used to fit the covariance; zero for exact-moment fits.
    pub fn fit_sample_count(&self) -> usize {
        self.fit_sample_count
    }

    /// Flatten the fit into one numeric record for result files:
    /// `[k, fit_sample_count, r_smallest_singular_value]` followed by
    /// `u1`, `q` and `r_embedded` in row-major order.
    pub fn flat_record(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = Vec::with_capacity(3 + 3 * k * k + 9 * k * k + 6 * k * k);
        out.push(k as f64);
        out.push(self.fit_sample_count as f64);
        out.push(self.r_smallest_singular_value);
        for m in [&self.u1, self.q.as_matrix(), &self.r_embedded] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push(m[(i, j)]);
                }
            }
        }
        out
    }

    /// Map raw stacked views to the fused feature: `(x - center) U_1`
    /// row-wise.
    pub fn transform(&self, x: &DMatrix<f64>, center: &DVector<f64>) -> Result<DMatrix<f64>> {
        let dim = 3 * self.k;
        if x.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: "input columns",
                expected: dim,
                actual: x.ncols(),
            });
        }
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "center length",
                expected: dim,
                actual: center.len(),
            });
        }
        let mut out = x * &self.u1;
        let offset = (center.transpose() * &self.u1).transpose();
        for mut row in out.row_iter_mut() {
            row -= offset.transpose();
        }
        Ok(out)
    }

    /// Numerical witnesses of this fit against exact moments.
    pub fn validate(&self, moments: &PopulationMoments) -> WeightingDiagnostics {
        let discarded = (self.r_embedded.transpose() * moments.sigma_xh()).amax();
        let principal_angles_to_oracle =
            linalg::orthonormal_basis(&self.u1, linalg::DEFAULT_RANK_TOL)
                .ok()
                .and_then(|u1_basis| {
                    let oracle = moments.oracle_subspace().ok()?;
                    linalg::principal_angles(&u1_basis, &oracle).ok()
                });
        // scale-free rank margin: unit-normalize columns before the SVD
        let mut normalized = self.r_embedded.clone();
        for mut col in normalized.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        let r_rank_margin = normalized
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        WeightingDiagnostics {
            discarded_hidden_covariance_max: discarded,
            principal_angles_to_oracle,
            r_rank_margin,
        }
    }
}

/// Element-wise sum of the three `k`-wide view blocks (the naive fusion
/// baseline; downstream regression absorbs the missing 1/3 factor).
pub fn average_views(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !x.ncols().is_multiple_of(3) || x.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "column count {} is not divisible by 3",
            x.ncols()
        )));
    }
    let k = x.ncols() / 3;
    let mut out = x.columns(0, k).into_owned();
    out += x.columns(k, k);
    out += x.columns(2 * k, k);
    Ok(out)
}

/// Feature map of [`average_views`] on raw stacked views: three stacked
/// `k x k` identities.
pub fn average_views_map(k: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(3 * k, k);
    for block in 0..3 {
        for d in 0..k {
            f[(block * k + d, d)] = 1.0;
        }
    }
    f
}
