//! Property tests for the numerical contracts: random inputs are generated
//! from proptest-driven seeds so shrinking stays meaningful while the
//! matrices themselves come from the usual seeded generators.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use multiview::cca;
use multiview::linalg::{self, OrthonormalBasis, PsdMatrix, DEFAULT_RANK_TOL};
use multiview::model::GaussianThreeViewModel;
use multiview::weighting;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_psd(dim: usize, seed: u64) -> PsdMatrix {
    let g = gaussian_matrix(dim, dim, seed);
    PsdMatrix::new(&g * g.transpose()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sym_sqrt_multiplies_back_to_shifted_input(seed in 0u64..10_000, dim in 1usize..9, ridge in 0.0f64..0.5) {
        let s = random_psd(dim, seed);
        let q = linalg::sym_sqrt(&s, ridge).unwrap();
        let expected = s.as_matrix() + DMatrix::identity(dim, dim) * ridge;
        let rel = (q.as_matrix() * q.as_matrix() - &expected).norm() / expected.norm();
        prop_assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn sym_inv_sqrt_whitens_shifted_input(seed in 0u64..10_000, dim in 1usize..9) {
        let s = random_psd(dim, seed);
        let ridge = s.default_ridge();
        let w = linalg::sym_inv_sqrt(&s, ridge).unwrap();
        let shifted = s.as_matrix() + DMatrix::identity(dim, dim) * ridge;
        let err = (&w * shifted * &w - DMatrix::identity(dim, dim)).amax();
        prop_assert!(err < 1e-6, "whitening error {err}");
    }

    #[test]
    fn complement_concatenation_is_orthogonal(seed in 0u64..10_000, dim in 2usize..9, cols in 1usize..4) {
        let cols = cols.min(dim - 1);
        let basis = linalg::orthonormal_basis(&gaussian_matrix(dim, cols, seed), DEFAULT_RANK_TOL).unwrap();
        let complement = linalg::orthonormal_complement(&basis).unwrap();
        prop_assert_eq!(complement.num_cols(), dim - basis.num_cols());
        let mut square = DMatrix::zeros(dim, dim);
        square.columns_mut(0, basis.num_cols()).copy_from(basis.as_matrix());
        square
            .columns_mut(basis.num_cols(), complement.num_cols())
            .copy_from(complement.as_matrix());
        let gram = square.transpose() * &square;
        prop_assert!((gram - DMatrix::identity(dim, dim)).amax() < 1e-8);
    }

    #[test]
    fn principal_angles_are_symmetric(seed in 0u64..10_000, dim in 2usize..8) {
        let b1 = linalg::orthonormal_basis(&gaussian_matrix(dim, 1 + seed as usize % (dim - 1), seed), DEFAULT_RANK_TOL).unwrap();
        let b2 = linalg::orthonormal_basis(&gaussian_matrix(dim, 1 + (seed / 7) as usize % (dim - 1), seed + 1), DEFAULT_RANK_TOL).unwrap();
        let a12 = linalg::principal_angles(&b1, &b2).unwrap();
        let a21 = linalg::principal_angles(&b2, &b1).unwrap();
        prop_assert_eq!(a12.len(), a21.len());
        for (x, y) in a12.iter().zip(a21.iter()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_correlations_live_in_unit_interval(seed in 0u64..10_000, k in 1usize..5) {
        let model = GaussianThreeViewModel::random(k, seed);
        let s = model.population_moments();
        let sm = s.sigma_xx().as_matrix();
        let aa = PsdMatrix::new(sm.view((0, 0), (k, k)).into_owned()).unwrap();
        let bb = PsdMatrix::new(sm.view((k, k), (2 * k, 2 * k)).into_owned()).unwrap();
        let ab = sm.view((0, k), (k, 2 * k)).into_owned();
        let result = cca::cca(&aa, &bb, &ab, 0.0).unwrap();
        prop_assert_eq!(result.correlations().len(), k);
        for &c in result.correlations().iter() {
            prop_assert!((0.0..=1.0 + 1e-8).contains(&c));
        }
        // descending order
        for pair in result.correlations().as_slice().windows(2) {
            prop_assert!(pair[0] >= pair[1] - 1e-12);
        }
        // exactly min-rank many exceed the noise floor on exact moments
        prop_assert_eq!(result.correlations().iter().filter(|&&c| c > 1e-6).count(), k);
    }

    #[test]
    fn fused_fit_is_lossless_on_exact_moments(seed in 0u64..10_000, k in 1usize..5) {
        let model = GaussianThreeViewModel::random(k, seed);
        let moments = model.population_moments();
        let proj = weighting::fit(moments.sigma_xx(), k, 0.0).unwrap();
        let fused = linalg::orthonormal_basis(proj.u1(), DEFAULT_RANK_TOL).unwrap();
        let gap = (moments.optimal_loss(Some(&fused)).unwrap() - moments.optimal_loss(None).unwrap()).abs();
        prop_assert!(gap < 1e-8, "loss gap {gap}");
        let hidden_cov = (proj.r_embedded().transpose() * moments.sigma_xh()).amax();
        prop_assert!(hidden_cov < 1e-8, "discarded hidden covariance {hidden_cov}");
    }

    #[test]
    fn optimal_loss_never_improves_under_restriction(seed in 0u64..10_000, k in 1usize..4) {
        let model = GaussianThreeViewModel::random(k, seed);
        let moments = model.population_moments();
        let full = moments.optimal_loss(None).unwrap();
        let floor = model.y_noise_sd() * model.y_noise_sd();
        prop_assert!(full >= floor - 1e-12);
        // restricting to a random subspace can only increase the loss
        let cols = 1 + (seed as usize) % (3 * k);
        let basis = linalg::orthonormal_basis(&gaussian_matrix(3 * k, cols, seed + 2), DEFAULT_RANK_TOL).unwrap();
        let restricted = moments.optimal_loss(Some(&basis)).unwrap();
        prop_assert!(restricted >= full - 1e-10, "restricted {restricted} < full {full}");
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed(seed in 0u64..10_000, k in 1usize..4) {
        let model = GaussianThreeViewModel::random(k, seed);
        let a = model.sample(16, seed ^ 0xabcd);
        let b = model.sample(16, seed ^ 0xabcd);
        prop_assert_eq!(a.views(), b.views());
        prop_assert_eq!(a.labels(), b.labels());
    }
}

#[test]
fn optimal_loss_monotone_along_growing_subspace() {
    // non-proptest: one deterministic nested chain per k
    for k in [2usize, 3] {
        let model = GaussianThreeViewModel::random(k, 7 + k as u64);
        let moments = model.population_moments();
        let full_basis =
            linalg::orthonormal_basis(&gaussian_matrix(3 * k, 3 * k, 17), DEFAULT_RANK_TOL)
                .unwrap();
        let mut prev = f64::INFINITY;
        for cols in 1..=3 * k {
            let sub = OrthonormalBasis::new(full_basis.as_matrix().columns(0, cols).into_owned())
                .unwrap();
            let loss = moments.optimal_loss(Some(&sub)).unwrap();
            assert!(loss <= prev + 1e-12, "loss increased when adding a column");
            prev = loss;
        }
        let full = moments.optimal_loss(None).unwrap();
        assert!((prev - full).abs() < 1e-9);
    }
}

#[test]
fn transform_span_is_invariant_under_view_rotation() {
    // rotating one view's coordinates leaves the fused feature span intact
    let k = 2;
    let model = GaussianThreeViewModel::random(k, 31);
    let moments = model.population_moments();
    let proj = weighting::fit(moments.sigma_xx(), k, 0.0).unwrap();

    let g_small = linalg::orthonormal_basis(&gaussian_matrix(k, k, 77), DEFAULT_RANK_TOL).unwrap();
    let mut g = DMatrix::identity(3 * k, 3 * k);
    g.view_mut((0, 0), (k, k)).copy_from(g_small.as_matrix());
    let rotated = PsdMatrix::new(&g * moments.sigma_xx().as_matrix() * g.transpose()).unwrap();
    let proj_rot = weighting::fit(&rotated, k, 0.0).unwrap();

    let data = model.sample(64, 32);
    let center = DVector::zeros(3 * k);
    let base_features = proj.transform(data.views(), &center).unwrap();
    let rotated_views = data.views() * g.transpose();
    let rot_features = proj_rot.transform(&rotated_views, &center).unwrap();

    // same sample, so equal feature spans mean equal column spaces in R^n
    let b1 = linalg::orthonormal_basis(&base_features, 1e-8).unwrap();
    let b2 = linalg::orthonormal_basis(&rot_features, 1e-8).unwrap();
    let angle = linalg::max_principal_angle(&b1, &b2).unwrap();
    assert!(angle < 1e-8, "feature column spans differ by {angle}");
}
