//! Least-squares polynomial regression on a monomial total-degree basis.

use super::{ContinuationEstimator, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Ridge regularization for the normal equations.
///
/// `Auto` scales with the problem (1e-8 times the trace of the normal
/// matrix), enough to survive the near-collinear bases that deep
/// in-the-money regressions produce. `Fixed(0.0)` requests the unregularized
/// solve, which reports `SingularSystem` on degenerate data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ridge {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBasisConfig {
    /// Maximum total degree of the monomial basis.
    pub order: usize,
    pub ridge: Ridge,
}

impl PolynomialBasisConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            ridge: Ridge::Auto,
        }
    }

    pub fn with_ridge(order: usize, ridge: f64) -> Self {
        Self {
            order,
            ridge: Ridge::Fixed(ridge),
        }
    }

    pub fn describe(&self) -> String {
        match self.ridge {
            Ridge::Auto => format!("polynomial(order={}, ridge=auto)", self.order),
            Ridge::Fixed(l) => format!("polynomial(order={}, ridge={l})", self.order),
        }
    }
}

/// All multi-indices over `dim` variables with total degree at most `order`,
/// in graded lexicographic order starting from the constant term.
fn monomial_exponents(dim: usize, order: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    for degree in 0..=order as u32 {
        emit_degree(dim, degree, 0, &mut current, &mut out);
    }
    out
}

fn emit_degree(
    dim: usize,
    remaining: u32,
    pos: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if pos == dim - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        emit_degree(dim, remaining - e, pos + 1, current, out);
        current[pos] = 0;
    }
}

#[derive(Debug, Clone)]
struct Fitted {
    dim: usize,
    exponents: Vec<Vec<u32>>,
    /// Per-feature scale (root mean square) applied before the monomials.
    scales: Vec<f64>,
    coefficients: Vec<f64>,
}

/// Polynomial least-squares estimator.
///
/// Features are divided by their root-mean-square before the basis is
/// evaluated; this diagonal reparametrization leaves the fitted function
/// unchanged at ridge zero while keeping the normal matrix well conditioned
/// for price-scale inputs. The normal equations are built from sample
/// averages of basis products and solved by Cholesky factorization.
#[derive(Debug, Clone)]
pub struct PolynomialEstimator {
    config: PolynomialBasisConfig,
    fitted: Option<Fitted>,
}

impl PolynomialEstimator {
    pub fn new(config: PolynomialBasisConfig) -> Self {
        Self {
            config,
            fitted: None,
        }
    }

    /// Fitted basis coefficients, in graded lexicographic exponent order.
    pub fn coefficients(&self) -> Option<&[f64]> {
        self.fitted.as_ref().map(|f| f.coefficients.as_slice())
    }

    pub fn n_basis(&self) -> Option<usize> {
        self.fitted.as_ref().map(|f| f.exponents.len())
    }
}

fn basis_row(exponents: &[Vec<u32>], scales: &[f64], x: ArrayView1<f64>, out: &mut [f64]) {
    for (slot, exps) in out.iter_mut().zip(exponents) {
        let mut v = 1.0;
        for (j, &e) in exps.iter().enumerate() {
            let xs = x[j] / scales[j];
            for _ in 0..e {
                v *= xs;
            }
        }
        *slot = v;
    }
}

/// Cholesky solve of the symmetric positive-definite system `a x = b`.
/// Reports the failing pivot so callers can distinguish rank deficiency.
fn solve_spd(mut a: Array2<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, RegressionError> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0f64, f64::max);
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= a[[j, k]] * a[[j, k]];
        }
        if pivot <= tol {
            return Err(RegressionError::SingularSystem { index: j, pivot });
        }
        let pivot = pivot.sqrt();
        a[[j, j]] = pivot;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / pivot;
        }
    }
    // Forward substitution L z = b, then back substitution L^T x = z.
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[[i, k]] * b[k];
        }
        b[i] = v / a[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[[k, i]] * b[k];
        }
        b[i] = v / a[[i, i]];
    }
    Ok(b)
}

impl ContinuationEstimator for PolynomialEstimator {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, targets)?;
        let (n, dim) = features.dim();
        if dim == 0 {
            return Err(RegressionError::InvalidConfig(
                "feature matrix has no columns".into(),
            ));
        }
        let exponents = monomial_exponents(dim, self.config.order);
        let m = exponents.len();

        let mut scales = vec![0.0; dim];
        for j in 0..dim {
            let ms: f64 = features.column(j).iter().map(|v| v * v).sum::<f64>() / n as f64;
            let rms = ms.sqrt();
            scales[j] = if rms > 0.0 { rms } else { 1.0 };
        }

        // Normal equations from sample averages of psi_k psi_l and y psi_l.
        let mut gram = Array2::<f64>::zeros((m, m));
        let mut moment = vec![0.0; m];
        let mut row = vec![0.0; m];
        for (i, x) in features.rows().into_iter().enumerate() {
            basis_row(&exponents, &scales, x, &mut row);
            for k in 0..m {
                for l in 0..=k {
                    gram[[k, l]] += row[k] * row[l];
                }
                moment[k] += targets[i] * row[k];
            }
        }
        let inv_n = 1.0 / n as f64;
        for k in 0..m {
            for l in 0..=k {
                let v = gram[[k, l]] * inv_n;
                gram[[k, l]] = v;
                gram[[l, k]] = v;
            }
            moment[k] *= inv_n;
        }

        let lambda = match self.config.ridge {
            Ridge::Auto => 1e-8 * gram.diag().sum(),
            Ridge::Fixed(l) => l,
        };
        for k in 0..m {
            gram[[k, k]] += lambda;
        }

        let coefficients = solve_spd(gram, moment)?;
        self.fitted = Some(Fitted {
            dim,
            exponents,
            scales,
            coefficients,
        });
        Ok(())
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        let fitted = self.fitted.as_ref().ok_or(RegressionError::NotFitted)?;
        check_predict_dim(fitted.dim, features)?;
        let mut row = vec![0.0; fitted.exponents.len()];
        let mut out = Array1::zeros(features.nrows());
        for (i, x) in features.rows().into_iter().enumerate() {
            basis_row(&fitted.exponents, &fitted.scales, x, &mut row);
            out[i] = row
                .iter()
                .zip(&fitted.coefficients)
                .map(|(p, c)| p * c)
                .sum();
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_polynomial(
    config: PolynomialBasisConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<PolynomialEstimator, RegressionError> {
    let mut est = PolynomialEstimator::new(config);
    est.fit(features, targets)?;
    Ok(est)
}
