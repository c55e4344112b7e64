//! Random forest: averaged CART trees over bootstrap resamples with
//! per-split feature subsampling.

use super::tree::{FittedTree, TreeConfig, grow_tree};
use super::{ContinuationEstimator, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `Some(f)` draws `ceil(f * n)` rows with replacement per tree;
    /// `None` trains every tree on the full sample.
    pub bootstrap: Option<f64>,
    /// Fraction of features considered at each split (at least one).
    pub feature_fraction: f64,
    pub seed: u64,
    pub tree: TreeConfig,
}

impl ForestConfig {
    pub fn describe(&self) -> String {
        let boot = match self.bootstrap {
            Some(f) => f.to_string(),
            None => "off".to_string(),
        };
        format!(
            "forest(n_trees={}, bootstrap={boot}, feature_fraction={}, seed={}, {})",
            self.n_trees,
            self.feature_fraction,
            self.seed,
            self.tree.describe()
        )
    }

    fn validate(&self) -> Result<(), RegressionError> {
        if self.n_trees == 0 {
            return Err(RegressionError::InvalidConfig(
                "n_trees must be at least 1".into(),
            ));
        }
        if let Some(f) = self.bootstrap {
            if !(f > 0.0) {
                return Err(RegressionError::InvalidConfig(format!(
                    "bootstrap fraction must be positive, got {f}"
                )));
            }
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(RegressionError::InvalidConfig(format!(
                "feature_fraction must lie in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        self.tree.validate()
    }
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: Some(1.0),
            feature_fraction: 1.0,
            seed: 0,
            tree: TreeConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestEstimator {
    config: ForestConfig,
    trees: Vec<FittedTree>,
    dim: usize,
}

impl ForestEstimator {
    pub fn new(config: ForestConfig) -> Self {
        Self {
            config,
            trees: Vec::new(),
            dim: 0,
        }
    }

    /// One prediction row per tree, so callers can verify the ensemble mean.
    pub fn predict_per_tree(
        &self,
        features: ArrayView2<f64>,
    ) -> Result<Array2<f64>, RegressionError> {
        if self.trees.is_empty() {
            return Err(RegressionError::NotFitted);
        }
        check_predict_dim(self.dim, features)?;
        let mut out = Array2::zeros((self.trees.len(), features.nrows()));
        for (t, tree) in self.trees.iter().enumerate() {
            for (q, x) in features.rows().into_iter().enumerate() {
                out[[t, q]] = tree.predict_row(x);
            }
        }
        Ok(out)
    }
}

/// `count` distinct values from `0..d`, ascending, via partial Fisher-Yates.
fn sample_features(rng: &mut ChaCha8Rng, d: usize, count: usize) -> Vec<usize> {
    if count >= d {
        return (0..d).collect();
    }
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..count {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    let mut picked = pool[..count].to_vec();
    picked.sort_unstable();
    picked
}

impl ContinuationEstimator for ForestEstimator {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, targets)?;
        self.config.validate()?;
        let n = features.nrows();
        let d = features.ncols();
        let per_split = ((self.config.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
        let seed = self.config.seed;
        let bootstrap = self.config.bootstrap;
        let tree_cfg = &self.config.tree;

        // Each tree draws from its own substream, so parallel fitting is
        // identical to sequential.
        self.trees = (0..self.config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = match bootstrap {
                    Some(f) => {
                        let m = ((f * n as f64).ceil() as usize).max(1);
                        (0..m).map(|_| rng.random_range(0..n)).collect()
                    }
                    None => (0..n).collect(),
                };
                grow_tree(features, targets, rows, tree_cfg, |dim| {
                    sample_features(&mut rng, dim, per_split)
                })
            })
            .collect();
        self.dim = d;
        Ok(())
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        let per_tree = self.predict_per_tree(features)?;
        let n_trees = self.trees.len() as f64;
        Ok(per_tree.sum_axis(ndarray::Axis(0)) / n_trees)
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_forest(
    config: ForestConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<ForestEstimator, RegressionError> {
    let mut est = ForestEstimator::new(config);
    est.fit(features, targets)?;
    Ok(est)
}
