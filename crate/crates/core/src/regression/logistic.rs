//! Binary logistic regression trained by full-batch gradient ascent.

use super::{ExerciseClassifier, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, ArrayView1, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop when the gradient infinity-norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iters: 1000,
            tolerance: 1e-8,
        }
    }
}

impl LogisticConfig {
    pub fn describe(&self) -> String {
        format!(
            "logistic(learning_rate={}, max_iters={}, tolerance={})",
            self.learning_rate, self.max_iters, self.tolerance
        )
    }

    fn validate(&self) -> Result<(), RegressionError> {
        if !(self.learning_rate > 0.0) {
            return Err(RegressionError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_iters == 0 {
            return Err(RegressionError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.tolerance >= 0.0) {
            return Err(RegressionError::InvalidConfig(format!(
                "tolerance must be non-negative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-likelihood of binary labels under `sigmoid(w.x + b)`, with its
/// gradient in `(w, b)`. Exposed so the analytic gradient can be checked
/// against finite differences.
pub fn log_likelihood_and_gradient(
    weights: ArrayView1<f64>,
    bias: f64,
    features: ArrayView2<f64>,
    labels: ArrayView1<f64>,
) -> (f64, Array1<f64>, f64) {
    let n = features.nrows() as f64;
    let mut ll = 0.0;
    let mut grad_w = Array1::<f64>::zeros(weights.len());
    let mut grad_b = 0.0;
    for (x, &y) in features.rows().into_iter().zip(labels.iter()) {
        let z: f64 = x.iter().zip(weights.iter()).map(|(a, w)| a * w).sum::<f64>() + bias;
        // y*z - ln(1 + e^z), computed without overflow.
        ll += y * z - (z.max(0.0) + (-z.abs()).exp().ln_1p());
        let err = y - sigmoid(z);
        grad_w.iter_mut().zip(x.iter()).for_each(|(g, a)| *g += err * a);
        grad_b += err;
    }
    (ll / n, grad_w / n, grad_b / n)
}

#[derive(Debug, Clone)]
struct Fitted {
    weights: Array1<f64>,
    bias: f64,
    means: Array1<f64>,
    scales: Array1<f64>,
}

/// Logistic exercise classifier.
///
/// Features are standardized internally (stored mean and standard
/// deviation) before the ascent; weights start at zero, so the initial
/// model predicts probability one half everywhere.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    config: LogisticConfig,
    fitted: Option<Fitted>,
}

impl LogisticRegression {
    pub fn new(config: LogisticConfig) -> Self {
        Self {
            config,
            fitted: None,
        }
    }

    /// Standardized-space weights and bias, available after fit.
    pub fn parameters(&self) -> Option<(ArrayView1<'_, f64>, f64)> {
        self.fitted.as_ref().map(|f| (f.weights.view(), f.bias))
    }
}

impl ExerciseClassifier for LogisticRegression {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        labels: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, labels)?;
        self.config.validate()?;
        if let Some(&bad) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(RegressionError::NonBinaryLabels(bad));
        }
        let (n, d) = features.dim();
        let means = features.sum_axis(ndarray::Axis(0)) / n as f64;
        let mut scales = Array1::<f64>::zeros(d);
        for j in 0..d {
            let var: f64 = features
                .column(j)
                .iter()
                .map(|v| (v - means[j]) * (v - means[j]))
                .sum::<f64>()
                / n as f64;
            let sd = var.sqrt();
            scales[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        let mut standardized = features.to_owned();
        for j in 0..d {
            standardized
                .column_mut(j)
                .mapv_inplace(|v| (v - means[j]) / scales[j]);
        }

        let mut weights = Array1::<f64>::zeros(d);
        let mut bias = 0.0;
        for _ in 0..self.config.max_iters {
            let (_, grad_w, grad_b) =
                log_likelihood_and_gradient(weights.view(), bias, standardized.view(), labels);
            let g_inf = grad_w
                .iter()
                .map(|g| g.abs())
                .fold(grad_b.abs(), f64::max);
            if g_inf < self.config.tolerance {
                break;
            }
            weights.scaled_add(self.config.learning_rate, &grad_w);
            bias += self.config.learning_rate * grad_b;
        }
        self.fitted = Some(Fitted {
            weights,
            bias,
            means,
            scales,
        });
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        let fitted = self.fitted.as_ref().ok_or(RegressionError::NotFitted)?;
        check_predict_dim(fitted.weights.len(), features)?;
        Ok(Array1::from_iter(features.rows().into_iter().map(|x| {
            let z: f64 = x
                .iter()
                .zip(fitted.weights.iter())
                .zip(fitted.means.iter().zip(fitted.scales.iter()))
                .map(|((v, w), (m, s))| w * (v - m) / s)
                .sum::<f64>()
                + fitted.bias;
            sigmoid(z)
        })))
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_logistic(
    config: LogisticConfig,
    features: ArrayView2<f64>,
    labels: ArrayView1<f64>,
) -> Result<LogisticRegression, RegressionError> {
    let mut est = LogisticRegression::new(config);
    est.fit(features, labels)?;
    Ok(est)
}
