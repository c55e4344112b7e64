//! Continuation-value estimators and the exercise classifier.
//!
//! Every estimator implements [`ContinuationEstimator`]: fit on a feature
//! matrix (one row per path, one column per state variable) against realized
//! continuation targets, then predict on arbitrary rows. All estimators are
//! deterministic given their configuration, seed and data; the ensemble
//! methods derive per-tree RNG substreams so parallel fitting cannot change
//! results.

mod boost;
mod forest;
mod knn;
mod logistic;
mod polynomial;
mod tree;

pub(crate) use logistic::sigmoid;

pub use boost::{BoostConfig, BoostEstimator, fit_boost};
pub use forest::{ForestConfig, ForestEstimator, fit_forest};
pub use knn::{KnnConfig, KnnEstimator, fit_knn};
pub use logistic::{
    LogisticConfig, LogisticRegression, fit_logistic, log_likelihood_and_gradient,
};
pub use polynomial::{PolynomialBasisConfig, PolynomialEstimator, Ridge, fit_polynomial};
pub use tree::{TreeConfig, TreeEstimator, fit_tree};

use ndarray::{Array1, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("estimator must be fitted before predict")]
    NotFitted,
    #[error("feature rows ({rows}) and target length ({targets}) disagree")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("prediction features have {got} columns, estimator was fitted with {expected}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds training size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error(
        "normal equations are numerically singular (pivot {pivot:.3e} at column {index}); \
         use a positive ridge"
    )]
    SingularSystem { index: usize, pivot: f64 },
    #[error("classification labels must be 0 or 1, found {0}")]
    NonBinaryLabels(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Regression interface used by the pricing backward induction: estimate
/// the continuation value as a function of the current state.
///
/// `fit` is exclusive; a fitted estimator is immutable and `predict` may be
/// called concurrently.
pub trait ContinuationEstimator: Send + Sync {
    /// Fit on `n x d` features against `n` targets. Replaces any prior fit.
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>)
    -> Result<(), RegressionError>;

    /// Predict one value per input row. Errors before `fit` succeeds.
    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError>;

    /// Human-readable hyperparameter summary for result metadata.
    fn describe(&self) -> String;
}

/// Binary classifier interface for the exercise/continue decision.
pub trait ExerciseClassifier: Send + Sync {
    /// Fit on `n x d` features against labels in {0, 1}.
    fn fit(&mut self, features: ArrayView2<f64>, labels: ArrayView1<f64>)
    -> Result<(), RegressionError>;

    /// Probability of the positive (exercise) class per input row.
    fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError>;

    fn describe(&self) -> String;
}

/// Configuration for every estimator the engine can plug into the backward
/// induction. `Logistic` is the classifier-mode choice; the rest are
/// continuation-value regressors.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Polynomial(PolynomialBasisConfig),
    Knn(KnnConfig),
    Tree(TreeConfig),
    Forest(ForestConfig),
    Boost(BoostConfig),
    Logistic(LogisticConfig),
}

impl EstimatorSpec {
    /// Fresh unfitted regressor. `None` for `Logistic`, which is not a
    /// continuation-value regressor.
    pub fn build_regressor(&self) -> Option<Box<dyn ContinuationEstimator>> {
        match self {
            EstimatorSpec::Polynomial(c) => Some(Box::new(PolynomialEstimator::new(c.clone()))),
            EstimatorSpec::Knn(c) => Some(Box::new(KnnEstimator::new(c.clone()))),
            EstimatorSpec::Tree(c) => Some(Box::new(TreeEstimator::new(c.clone()))),
            EstimatorSpec::Forest(c) => Some(Box::new(ForestEstimator::new(c.clone()))),
            EstimatorSpec::Boost(c) => Some(Box::new(BoostEstimator::new(c.clone()))),
            EstimatorSpec::Logistic(_) => None,
        }
    }

    /// Fresh unfitted classifier. `None` for the regressor specs.
    pub fn build_classifier(&self) -> Option<Box<dyn ExerciseClassifier>> {
        match self {
            EstimatorSpec::Logistic(c) => Some(Box::new(LogisticRegression::new(c.clone()))),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EstimatorSpec::Polynomial(c) => c.describe(),
            EstimatorSpec::Knn(c) => c.describe(),
            EstimatorSpec::Tree(c) => c.describe(),
            EstimatorSpec::Forest(c) => c.describe(),
            EstimatorSpec::Boost(c) => c.describe(),
            EstimatorSpec::Logistic(c) => c.describe(),
        }
    }

    /// Short name used in CLI table output and CSV metadata.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Polynomial(_) => "polynomial",
            EstimatorSpec::Knn(_) => "knn",
            EstimatorSpec::Tree(_) => "tree",
            EstimatorSpec::Forest(_) => "forest",
            EstimatorSpec::Boost(_) => "boost",
            EstimatorSpec::Logistic(_) => "logistic",
        }
    }
}

pub(crate) fn check_training_shapes(
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<(), RegressionError> {
    if features.nrows() != targets.len() {
        return Err(RegressionError::LengthMismatch {
            rows: features.nrows(),
            targets: targets.len(),
        });
    }
    if features.nrows() == 0 {
        return Err(RegressionError::EmptyTrainingSet);
    }
    Ok(())
}

pub(crate) fn check_predict_dim(
    expected: usize,
    features: ArrayView2<f64>,
) -> Result<(), RegressionError> {
    if features.ncols() != expected {
        return Err(RegressionError::FeatureDimMismatch {
            expected,
            got: features.ncols(),
        });
    }
    Ok(())
}
