//! k-nearest-neighbour regression under Euclidean distance.

use super::{ContinuationEstimator, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
}

impl KnnConfig {
    pub fn describe(&self) -> String {
        format!("knn(k={})", self.k)
    }
}

/// Brute-force k-NN. Distance ties break toward the lower training-row
/// index; the prediction is the mean target over the selected neighbours,
/// accumulated in (distance, index) order so it is reproducible.
#[derive(Debug, Clone)]
pub struct KnnEstimator {
    config: KnnConfig,
    train: Option<(Array2<f64>, Array1<f64>)>,
}

impl KnnEstimator {
    pub fn new(config: KnnConfig) -> Self {
        Self {
            config,
            train: None,
        }
    }

    fn predict_one(&self, x: ArrayView1<f64>) -> f64 {
        let (features, targets) = self.train.as_ref().expect("checked by predict");
        let k = self.config.k;
        let mut ranked: Vec<(f64, usize)> = features
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        let by_distance_then_index =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, by_distance_then_index);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(by_distance_then_index);
        ranked.iter().map(|&(_, i)| targets[i]).sum::<f64>() / k as f64
    }
}

impl ContinuationEstimator for KnnEstimator {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, targets)?;
        if self.config.k == 0 {
            return Err(RegressionError::InvalidConfig("k must be at least 1".into()));
        }
        if self.config.k > features.nrows() {
            return Err(RegressionError::KTooLarge {
                k: self.config.k,
                n: features.nrows(),
            });
        }
        self.train = Some((features.to_owned(), targets.to_owned()));
        Ok(())
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        let (train_x, _) = self.train.as_ref().ok_or(RegressionError::NotFitted)?;
        check_predict_dim(train_x.ncols(), features)?;
        let rows: Vec<ArrayView1<f64>> = features.rows().into_iter().collect();
        let out: Vec<f64> = rows.par_iter().map(|x| self.predict_one(*x)).collect();
        Ok(Array1::from_vec(out))
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_knn(
    config: KnnConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<KnnEstimator, RegressionError> {
    let mut est = KnnEstimator::new(config);
    est.fit(features, targets)?;
    Ok(est)
}
