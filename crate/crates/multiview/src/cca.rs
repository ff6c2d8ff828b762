//! Empirical moment estimation and two-view canonical correlation
//! analysis.
//!
//! CCA is computed as the SVD of the whitened cross-covariance
//! `T = Sigma_aa^{-1/2} Sigma_ab Sigma_bb^{-1/2}`. The decomposition is
//! kept *full*: every whitened direction of each view appears in the
//! returned rotation, including the directions with zero correlation.
//! Those trailing directions are what the three-view construction consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, OrthonormalBasis, PsdMatrix};

/// Mean and covariance estimated from finite samples.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    mean: DVector<f64>,
    covariance: PsdMatrix,
    sample_count: usize,
}

impl CovarianceEstimate {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &PsdMatrix {
        &self.covariance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Column means and the centered covariance with `1/(n-1)` normalization,
/// symmetrized as `(C + C^T)/2`.
pub fn empirical_moments(data: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(CovarianceEstimate {
        mean,
        covariance: PsdMatrix::from_symmetric_unchecked(cov),
        sample_count: n,
    })
}

/// Which view of a [`CcaResult`] to address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Full canonical rotations for both views and the descending canonical
/// correlations.
///
/// `rot_a` is `d_a x d_a` and `rot_b` is `d_b x d_b`; column `i` of each
/// holds the direction of the `i`-th canonical variable. The first
/// `min(d_a, d_b)` column pairs carry the correlations; any further
/// columns complete the whitened space and have zero correlation with the
/// entire other view.
#[derive(Debug, Clone)]
pub struct CcaResult {
    rot_a: DMatrix<f64>,
    rot_b: DMatrix<f64>,
    correlations: DVector<f64>,
}

impl CcaResult {
    pub fn dim_a(&self) -> usize {
        self.rot_a.nrows()
    }

    pub fn dim_b(&self) -> usize {
        self.rot_b.nrows()
    }

    pub fn rotation(&self, side: Side) -> &DMatrix<f64> {
        match side {
            Side::A => &self.rot_a,
            Side::B => &self.rot_b,
        }
    }

    /// Canonical correlations, descending, clamped into [0, 1].
    pub fn correlations(&self) -> &DVector<f64> {
        &self.correlations
    }

    /// Projection onto the top `k` canonical variables of one view.
    ///
    /// Applying the returned `d_side x k` matrix to a (centered) sample of
    /// that view yields its `k` leading canonical variables.
    pub fn reduce_view_top_k(&self, side: Side, k: usize) -> Result<DMatrix<f64>> {
        let max_k = self.correlations.len();
        if k == 0 || k > max_k {
            return Err(Error::InvalidInput(format!(
                "top-k count {k} out of range 1..={max_k}"
            )));
        }
        Ok(self.rotation(side).columns(0, k).into_owned())
    }

    /// Gap between correlation `k-1` and correlation `k` (the boundary a
    /// top-`k` reduction cuts through). A gap below ~1e-10 means the kept
    /// span is not well defined at that `k`. `None` when `k` is at or past
    /// the end of the correlation list.
    pub fn boundary_gap(&self, k: usize) -> Option<f64> {
        if k == 0 || k >= self.correlations.len() {
            return None;
        }
        Some(self.correlations[k - 1] - self.correlations[k])
    }
}

/// Two-view CCA from covariance blocks.
///
/// Whitens each marginal with its symmetric inverse square root (after
/// adding `ridge` to the diagonal), takes the full SVD of the whitened
/// cross-covariance, and maps the singular vectors back through the
/// whitening transforms.
pub fn cca(
    sigma_aa: &PsdMatrix,
    sigma_bb: &PsdMatrix,
    sigma_ab: &DMatrix<f64>,
    ridge: f64,
) -> Result<CcaResult> {
    let d_a = sigma_aa.dim();
    let d_b = sigma_bb.dim();
    if sigma_ab.nrows() != d_a {
        return Err(Error::DimensionMismatch {
            what: "cross-covariance rows",
            expected: d_a,
            actual: sigma_ab.nrows(),
        });
    }
    if sigma_ab.ncols() != d_b {
        return Err(Error::DimensionMismatch {
            what: "cross-covariance columns",
            expected: d_b,
            actual: sigma_ab.ncols(),
        });
    }
    let w_a = linalg::sym_inv_sqrt(sigma_aa, ridge).map_err(|e| name_view(e, "first"))?;
    let w_b = linalg::sym_inv_sqrt(sigma_bb, ridge).map_err(|e| name_view(e, "second"))?;
    let t = &w_a * sigma_ab * &w_b;
    let (p, sigma, v) = full_svd(&t);
    let correlations = DVector::from_iterator(sigma.len(), sigma.iter().map(|s| s.clamp(0.0, 1.0)));
    Ok(CcaResult {
        rot_a: w_a * p,
        rot_b: w_b * v,
        correlations,
    })
}

fn name_view(err: Error, which: &str) -> Error {
    match err {
        Error::IllConditioned {
            smallest,
            threshold,
            ..
        } => Error::IllConditioned {
            smallest,
            threshold,
            context: format!("{which} view marginal covariance"),
        },
        other => other,
    }
}

/// Full SVD `T = P D V^T` with *all* left and right singular vectors.
///
/// The factorization is rebuilt around the numerically-nonzero singular
/// values in three moves. First the leading blocks are polished by
/// projecting through `T` itself (one Rayleigh-Ritz step: multiplying by
/// `T` annihilates any null-space contamination exactly) and re-splitting
/// the small well-conditioned core with a fresh SVD. Then the
/// zero-singular-value directions and, for rectangular `T`, the missing
/// completion columns are appended as an exact orthonormal complement of
/// the polished blocks. Without the polish, the implicit-QR factors next
/// to a cluster of zeros can miss the true range by ~1e-7 (reconstruction
/// error of the same order), far too much for the downstream
/// zero-covariance contracts.
///
/// Singular values come back descending; signs are fixed so each kept left
/// vector's largest-magnitude entry is positive (paired right vectors flip
/// with them).
fn full_svd(t: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = t.clone().svd(true, true);
    let p_thin = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * sigma_max)
        .count();

    let mut sigma = svd.singular_values;
    let (mut p_kept, mut v_kept) = (
        p_thin.columns(0, rank).into_owned(),
        svd.v_t
            .expect("right singular vectors requested")
            .transpose()
            .columns(0, rank)
            .into_owned(),
    );
    if rank > 0 {
        let rowspace = linalg::orthonormal_basis(&(t.transpose() * &p_kept), 1e-13);
        let range = rowspace
            .as_ref()
            .ok()
            .filter(|v1| v1.num_cols() == rank)
            .and_then(|v1| linalg::orthonormal_basis(&(t * v1.as_matrix()), 1e-13).ok())
            .filter(|u1| u1.num_cols() == rank);
        if let (Ok(v1), Some(u1)) = (rowspace, range) {
            let core = u1.as_matrix().transpose() * t * v1.as_matrix();
            let core_svd = core.svd(true, true);
            p_kept = u1.as_matrix() * core_svd.u.expect("core left vectors");
            v_kept = v1.as_matrix() * core_svd.v_t.expect("core right vectors").transpose();
            sigma.rows_mut(0, rank).copy_from(&core_svd.singular_values);
        }
    }

    // sign convention: largest-magnitude entry of each left vector positive
    for i in 0..rank {
        let col = p_kept.column(i);
        let mut lead = 0.0f64;
        for &x in col.iter() {
            if x.abs() > lead.abs() {
                lead = x;
            }
        }
        if lead < 0.0 {
            p_kept.column_mut(i).neg_mut();
            v_kept.column_mut(i).neg_mut();
        }
    }
    let p = complete_to_square(p_kept, t.nrows());
    let v = complete_to_square(v_kept, t.ncols());
    (p, sigma, v)
}

/// Extend an `n x m` orthonormal column set (`m <= n`) to a full `n x n`
/// orthogonal matrix by appending its orthonormal complement.
fn complete_to_square(kept: DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let m = kept.ncols();
    if m == n {
        return kept;
    }
    let basis = OrthonormalBasis::from_orthonormal_unchecked(kept);
    let complement =
        linalg::orthonormal_complement(&basis).expect("complement exists whenever m < n");
    let mut full = DMatrix::zeros(n, n);
    full.columns_mut(0, m).copy_from(basis.as_matrix());
    full.columns_mut(m, n - m).copy_from(complement.as_matrix());
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianThreeViewModel;

    fn view_blocks(
        moments: &crate::model::PopulationMoments,
        a_range: (usize, usize),
        b_range: (usize, usize),
    ) -> (PsdMatrix, PsdMatrix, DMatrix<f64>) {
        let s = moments.sigma_xx().as_matrix();
        let (a0, a_len) = a_range;
        let (b0, b_len) = b_range;
        let aa = PsdMatrix::new(s.view((a0, a0), (a_len, a_len)).into_owned()).unwrap();
        let bb = PsdMatrix::new(s.view((b0, b0), (b_len, b_len)).into_owned()).unwrap();
        let ab = s.view((a0, b0), (a_len, b_len)).into_owned();
        (aa, bb, ab)
    }

    #[test]
    fn empirical_moments_two_points() {
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let est = empirical_moments(&data).unwrap();
        assert_eq!(est.sample_count(), 2);
        assert!((est.mean() - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-12);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!((est.covariance().as_matrix() - &expected).amax() < 1e-12);
    }

    #[test]
    fn empirical_moments_constant_column_has_zero_variance() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let est = empirical_moments(&data).unwrap();
        let c = est.covariance().as_matrix();
        assert!(c[(1, 1)].abs() < 1e-12);
        assert!(c[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn empirical_moments_requires_two_rows() {
        let data = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            empirical_moments(&data),
            Err(Error::InsufficientData {
                required: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn cca_of_identical_views_has_unit_correlations() {
        let eye = PsdMatrix::identity(2);
        let result = cca(&eye, &eye, &DMatrix::identity(2, 2), 0.0).unwrap();
        assert!((result.correlations()[0] - 1.0).abs() < 1e-10);
        assert!((result.correlations()[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cca_of_independent_views_has_zero_correlations() {
        let aa = PsdMatrix::identity(3);
        let bb = PsdMatrix::identity(2);
        let result = cca(&aa, &bb, &DMatrix::zeros(3, 2), 0.0).unwrap();
        assert!(result.correlations().amax() < 1e-12);
        // rotations still whiten their marginals
        let ga = result.rotation(Side::A).transpose() * aa.as_matrix() * result.rotation(Side::A);
        assert!((ga - DMatrix::identity(3, 3)).amax() < 1e-6);
        let gb = result.rotation(Side::B).transpose() * bb.as_matrix() * result.rotation(Side::B);
        assert!((gb - DMatrix::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn cca_on_population_moments_has_rank_k_correlations() {
        let k = 3;
        let model = GaussianThreeViewModel::random(k, 19);
        let moments = model.population_moments();
        // view 1 (3 dims) against views 2 and 3 stacked (6 dims)
        let (aa, bb, ab) = view_blocks(&moments, (0, k), (k, 2 * k));
        let result = cca(&aa, &bb, &ab, 0.0).unwrap();
        assert_eq!(result.correlations().len(), k);
        assert!(result.correlations().iter().all(|&c| c > 1e-6));
        // the completed b-side directions are uncorrelated with all of view 1
        let trailing = result.rotation(Side::B).columns(k, k);
        let cross = &ab * trailing;
        assert!(
            cross.amax() < 1e-10,
            "max cross-covariance {}",
            cross.amax()
        );
    }

    #[test]
    fn rotations_diagonalize_the_cross_covariance() {
        let k = 2;
        let model = GaussianThreeViewModel::random(k, 23);
        let moments = model.population_moments();
        let (aa, bb, ab) = view_blocks(&moments, (0, k), (k, 2 * k));
        let result = cca(&aa, &bb, &ab, 0.0).unwrap();
        let d = result.rotation(Side::A).transpose() * &ab * result.rotation(Side::B);
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let expected = if i == j && i < result.correlations().len() {
                    result.correlations()[i]
                } else {
                    0.0
                };
                assert!(
                    (d[(i, j)] - expected).abs() < 1e-6,
                    "entry ({i},{j}) = {} vs {expected}",
                    d[(i, j)]
                );
            }
        }
    }

    #[test]
    fn correlations_invariant_under_view_reparameterization() {
        let k = 3;
        let model = GaussianThreeViewModel::random(k, 31);
        let moments = model.population_moments();
        let (aa, bb, ab) = view_blocks(&moments, (0, k), (k, 2 * k));
        let base = cca(&aa, &bb, &ab, 0.0).unwrap();

        // invertible reparameterization of view a
        let g = DMatrix::from_row_slice(3, 3, &[1.2, 0.3, 0.0, -0.5, 2.0, 0.1, 0.0, 0.7, 0.9]);
        let aa_g = PsdMatrix::from_symmetric_unchecked(&g * aa.as_matrix() * g.transpose());
        let ab_g = &g * &ab;
        let transformed = cca(&aa_g, &bb, &ab_g, 0.0).unwrap();
        let diff = (base.correlations() - transformed.correlations()).amax();
        assert!(diff < 1e-8, "correlation drift {diff}");
    }

    #[test]
    fn swapping_views_preserves_correlations_and_swaps_rotations() {
        let k = 2;
        let model = GaussianThreeViewModel::random(k, 37);
        let moments = model.population_moments();
        let (aa, bb, ab) = view_blocks(&moments, (0, k), (k, 2 * k));
        let forward = cca(&aa, &bb, &ab, 0.0).unwrap();
        let swapped = cca(&bb, &aa, &ab.transpose(), 0.0).unwrap();
        assert!((forward.correlations() - swapped.correlations()).amax() < 1e-10);
        assert_eq!(
            forward.rotation(Side::A).shape(),
            swapped.rotation(Side::B).shape()
        );
        assert_eq!(
            forward.rotation(Side::B).shape(),
            swapped.rotation(Side::A).shape()
        );
    }

    #[test]
    fn reduce_view_top_k_full_dimension_returns_whole_rotation() {
        let eye = PsdMatrix::identity(2);
        let result = cca(&eye, &eye, &DMatrix::identity(2, 2), 0.0).unwrap();
        let proj = result.reduce_view_top_k(Side::A, 2).unwrap();
        assert_eq!(&proj, result.rotation(Side::A));
    }

    #[test]
    fn reduce_view_top_k_rejects_out_of_range() {
        let eye = PsdMatrix::identity(2);
        let result = cca(&eye, &eye, &DMatrix::identity(2, 2), 0.0).unwrap();
        assert!(result.reduce_view_top_k(Side::A, 0).is_err());
        assert!(result.reduce_view_top_k(Side::A, 3).is_err());
    }

    #[test]
    fn decomposition_stays_accurate_next_to_zero_clusters() {
        // regression guard: on low-rank whitened cross-covariances with a
        // large zero cluster, the raw implicit-QR factors can miss the true
        // range by ~1e-7; the polish step must keep the trailing rotation
        // columns exactly uncorrelated with the other view
        use rand::prelude::*;
        use rand_chacha::ChaCha12Rng;
        use rand_distr::StandardNormal;
        for seed in [12u64, 13, 14, 99] {
            let (k, d) = (3usize, 9usize);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut gaussian = |rows: usize, cols: usize| {
                DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
            };
            let m_a = gaussian(d, k);
            let m_b = gaussian(d, k);
            let aa =
                PsdMatrix::new(&m_a * m_a.transpose() + DMatrix::identity(d, d) * 2.25).unwrap();
            let bb =
                PsdMatrix::new(&m_b * m_b.transpose() + DMatrix::identity(d, d) * 0.16).unwrap();
            let ab = &m_a * m_b.transpose();
            let result = cca(&aa, &bb, &ab, 0.0).unwrap();
            let trailing_a = result.rotation(Side::A).columns(k, d - k);
            let leak = (trailing_a.transpose() * &ab).amax();
            assert!(leak < 1e-10, "seed {seed}: range leak {leak}");
            let trailing_b = result.rotation(Side::B).columns(k, d - k);
            let leak_b = (&ab * trailing_b).amax();
            assert!(leak_b < 1e-10, "seed {seed}: b-side leak {leak_b}");
        }
    }

    #[test]
    fn boundary_gap_flags_ties_and_reports_separations() {
        let k = 2;
        let model = GaussianThreeViewModel::random(k, 41);
        let moments = model.population_moments();
        let (aa, bb, ab) = view_blocks(&moments, (0, k), (k, 2 * k));
        let result = cca(&aa, &bb, &ab, 0.0).unwrap();
        let gap = result.boundary_gap(1).unwrap();
        assert!((gap - (result.correlations()[0] - result.correlations()[1])).abs() < 1e-15);
        assert!(result.boundary_gap(0).is_none());
        assert!(result.boundary_gap(k).is_none());

        // identical correlations tie at the boundary
        let eye = PsdMatrix::identity(2);
        let tied = cca(&eye, &eye, &DMatrix::identity(2, 2), 0.0).unwrap();
        assert!(tied.boundary_gap(1).unwrap() < 1e-10);
    }

    #[test]
    fn ill_conditioned_marginal_names_the_view() {
        let singular =
            PsdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        let err = cca(
            &PsdMatrix::identity(2),
            &singular,
            &DMatrix::zeros(2, 2),
            0.0,
        );
        match err {
            Err(Error::IllConditioned { context, .. }) => {
                assert!(context.contains("second view"), "context: {context}")
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }
}
