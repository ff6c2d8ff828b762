//! Ordinary least squares and square-loss evaluation, both on finite
//! samples and exactly against population moments.
//!
//! Predictors optionally carry a feature map recording how raw stacked
//! views become their features; the exact evaluation needs it to express
//! the predictor as a linear function of the raw views.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::PopulationMoments;

/// A fitted linear predictor `y = w^T z + b` over features `z`.
#[derive(Debug, Clone)]
pub struct LinearPredictor {
    weights: DVector<f64>,
    intercept: f64,
    feature_map: Option<DMatrix<f64>>,
    train_count: usize,
}

/// How a loss was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    Empirical { test_count: usize },
    Population,
}

/// A square-loss measurement with its provenance.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub mean_squared_error: f64,
    pub feature_dim: usize,
    pub labeled_count: usize,
    pub evaluation: Evaluation,
}

/// Minimize `sum (y_i - w^T x_i - b)^2 + ridge ||w||^2` via Cholesky on the
/// centered normal equations. The intercept is always fitted.
pub fn ols_fit(
    features: &DMatrix<f64>,
    targets: &DVector<f64>,
    ridge: f64,
) -> Result<LinearPredictor> {
    let n = features.nrows();
    let p = features.ncols();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: n,
            actual: targets.len(),
        });
    }
    if ridge < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    if ridge == 0.0 && n < p + 1 {
        // centered design has rank at most n-1 < p
        return Err(Error::SingularDesign);
    }
    let mean_x = features.row_mean().transpose();
    let mean_y = targets.mean();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean_x.transpose();
    }
    let centered_y = targets.map(|y| y - mean_y);
    let mut gram = centered.transpose() * &centered;
    for d in 0..p {
        gram[(d, d)] += ridge;
    }
    let rhs = centered.transpose() * centered_y;
    let weights = if p == 0 {
        DVector::zeros(0)
    } else {
        Cholesky::new(gram)
            .ok_or(Error::SingularDesign)?
            .solve(&rhs)
    };
    let intercept = mean_y - weights.dot(&mean_x);
    Ok(LinearPredictor {
        weights,
        intercept,
        feature_map: None,
        train_count: n,
    })
}

impl LinearPredictor {
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn feature_map(&self) -> Option<&DMatrix<f64>> {
        self.feature_map.as_ref()
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    /// Attach the map `F` turning raw views into features (`z = F^T x`).
    pub fn with_feature_map(mut self, f: DMatrix<f64>) -> Result<Self> {
        if f.ncols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "feature map columns",
                expected: self.weights.len(),
                actual: f.ncols(),
            });
        }
        self.feature_map = Some(f);
        Ok(self)
    }

    /// Attach a feature map for features computed as `z = F^T (x - c)`,
    /// folding the centering into the intercept so the predictor reads
    /// directly off raw views.
    pub fn with_centered_feature_map(
        mut self,
        f: DMatrix<f64>,
        center: &DVector<f64>,
    ) -> Result<Self> {
        if f.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                what: "feature map rows",
                expected: center.len(),
                actual: f.nrows(),
            });
        }
        let shift = f.transpose() * center;
        self.intercept -= self.weights.dot(&shift);
        self.with_feature_map(f)
    }

    /// Predictions `X w + b` for a feature matrix.
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        if features.ncols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "feature columns",
                expected: self.weights.len(),
                actual: features.ncols(),
            });
        }
        Ok((features * &self.weights).add_scalar(self.intercept))
    }
}

/// Mean squared residual on an evaluation set.
pub fn empirical_loss(
    pred: &LinearPredictor,
    features: &DMatrix<f64>,
    targets: &DVector<f64>,
) -> Result<LossReport> {
    let m = features.nrows();
    if m < 1 {
        return Err(Error::InsufficientData {
            required: 1,
            actual: m,
        });
    }
    if targets.len() != m {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: m,
            actual: targets.len(),
        });
    }
    let residuals = targets - pred.predict(features)?;
    Ok(LossReport {
        mean_squared_error: residuals.norm_squared() / m as f64,
        feature_dim: pred.weights.len(),
        labeled_count: pred.train_count,
        evaluation: Evaluation::Empirical { test_count: m },
    })
}

/// Exact expected square loss of the predictor against population moments.
///
/// With feature map `F` and the population's zero-mean convention:
/// `var_y - 2 w^T F^T sigma_xy + w^T F^T Sigma_XX F w + b^2`.
pub fn population_loss(pred: &LinearPredictor, moments: &PopulationMoments) -> Result<LossReport> {
    let f = pred
        .feature_map
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("population loss needs a feature map".into()))?;
    if f.nrows() != moments.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature map rows",
            expected: moments.dim(),
            actual: f.nrows(),
        });
    }
    let raw_weights = f * &pred.weights;
    let quadratic =
        (raw_weights.transpose() * moments.sigma_xx().as_matrix() * &raw_weights)[(0, 0)];
    let cross = raw_weights.dot(moments.sigma_xy());
    let mse = moments.var_y() - 2.0 * cross + quadratic + pred.intercept * pred.intercept;
    Ok(LossReport {
        mean_squared_error: mse,
        feature_dim: pred.weights.len(),
        labeled_count: pred.train_count,
        evaluation: Evaluation::Population,
    })
}

/// The exact optimal predictor on a feature map `F`: weights
/// `(F^T Sigma F)^{-1} F^T sigma_xy`, zero intercept.
///
/// Used by the harness when losses should be free of finite-labeled-sample
/// noise.
pub fn optimal_predictor(moments: &PopulationMoments, f: DMatrix<f64>) -> Result<LinearPredictor> {
    if f.nrows() != moments.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature map rows",
            expected: moments.dim(),
            actual: f.nrows(),
        });
    }
    let restricted = f.transpose() * moments.sigma_xx().as_matrix() * &f;
    let rhs = f.transpose() * moments.sigma_xy();
    let chol = Cholesky::new(restricted).ok_or_else(|| Error::IllConditioned {
        smallest: 0.0,
        threshold: 0.0,
        context: "restricted feature covariance".to_string(),
    })?;
    let weights = chol.solve(&rhs);
    LinearPredictor {
        weights,
        intercept: 0.0,
        feature_map: None,
        train_count: 0,
    }
    .with_feature_map(f)
}
