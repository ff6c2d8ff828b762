//! Unsupervised multi-view dimension reduction with canonical correlation
//! analysis.
//!
//! Three observed views of the same data are assumed to be linear functions
//! of a shared low-dimensional hidden state plus independent noise. Under
//! that structure, two-view CCA reduces each view to the hidden dimension
//! `k` without losing linear-predictive information, and the three-view
//! weighting algorithm fuses the per-view estimates into a single
//! `k`-dimensional feature that is still lossless for linear regression on
//! any hidden-state-measurable target.
//!
//! Modules:
//! - [`linalg`]: symmetric square roots, orthonormal bases/complements,
//!   principal angles.
//! - [`model`]: the Gaussian three-view generative model, its exact
//!   population moments, and closed-form oracles.
//! - [`cca`]: empirical moments and two-view CCA with full rotations.
//! - [`weighting`]: the three-view optimal-weighting fit and diagnostics.
//! - [`regression`]: OLS fitting plus empirical and exact square-loss
//!   evaluation.
//! - [`harness`]: configuration-driven experiment runners with CSV/JSON
//!   output (exposed through the `multiview` binary).

pub mod cca;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod regression;
pub mod weighting;

pub use error::{Error, Result};
pub use linalg::{OrthonormalBasis, PsdMatrix};
pub use model::{Dataset, GaussianThreeViewModel, PopulationMoments};
