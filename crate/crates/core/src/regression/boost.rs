//! Least-squares gradient boosting over depth-limited regression trees.

use super::tree::{FittedTree, TreeConfig, grow_tree};
use super::{ContinuationEstimator, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, ArrayView1, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    /// Number of boosting rounds; zero keeps only the mean initialization.
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// Base learner; boosting conventionally keeps these shallow.
    pub tree: TreeConfig,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            tree: TreeConfig {
                max_depth: Some(3),
                min_samples_leaf: 1,
            },
        }
    }
}

impl BoostConfig {
    pub fn describe(&self) -> String {
        format!(
            "boost(n_rounds={}, learning_rate={}, {})",
            self.n_rounds,
            self.learning_rate,
            self.tree.describe()
        )
    }

    fn validate(&self) -> Result<(), RegressionError> {
        if !(self.learning_rate > 0.0) {
            return Err(RegressionError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone)]
pub struct BoostEstimator {
    config: BoostConfig,
    base: f64,
    trees: Vec<FittedTree>,
    dim: usize,
    training_rss: Vec<f64>,
    fitted: bool,
}

impl BoostEstimator {
    pub fn new(config: BoostConfig) -> Self {
        Self {
            config,
            base: 0.0,
            trees: Vec::new(),
            dim: 0,
            training_rss: Vec::new(),
            fitted: false,
        }
    }

    /// Training residual sum of squares after initialization and after each
    /// round; non-increasing for learning rates in (0, 2].
    pub fn training_rss(&self) -> &[f64] {
        &self.training_rss
    }
}

impl ContinuationEstimator for BoostEstimator {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, targets)?;
        self.config.validate()?;
        let n = features.nrows();
        self.base = targets.sum() / n as f64;
        self.dim = features.ncols();
        self.trees.clear();
        self.training_rss.clear();

        let mut residuals: Array1<f64> = targets.mapv(|t| t - self.base);
        self.training_rss
            .push(residuals.iter().map(|r| r * r).sum());
        for _ in 0..self.config.n_rounds {
            let rows: Vec<usize> = (0..n).collect();
            let tree = grow_tree(features, residuals.view(), rows, &self.config.tree, |d| {
                (0..d).collect()
            });
            for (i, x) in features.rows().into_iter().enumerate() {
                residuals[i] -= self.config.learning_rate * tree.predict_row(x);
            }
            self.training_rss
                .push(residuals.iter().map(|r| r * r).sum());
            self.trees.push(tree);
        }
        self.fitted = true;
        Ok(())
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        if !self.fitted {
            return Err(RegressionError::NotFitted);
        }
        check_predict_dim(self.dim, features)?;
        let mut out = Array1::from_elem(features.nrows(), self.base);
        for tree in &self.trees {
            for (i, x) in features.rows().into_iter().enumerate() {
                out[i] += self.config.learning_rate * tree.predict_row(x);
            }
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_boost(
    config: BoostConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<BoostEstimator, RegressionError> {
    let mut est = BoostEstimator::new(config);
    est.fit(features, targets)?;
    Ok(est)
}
