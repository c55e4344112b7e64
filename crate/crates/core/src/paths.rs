//! Seeded simulation of correlated geometric Brownian motion paths.
//!
//! Two stepping schemes are supported. `ArithmeticEuler` applies the update
//! `S(t+dt) = S(t)(1 + r dt + sigma sqrt(dt) eps)` literally, which can step
//! to a negative price when `sigma sqrt(dt)` is large; such prices are kept
//! as-is. `ExactLognormal` (the default) applies
//! `S(t+dt) = S(t) exp((r - sigma^2/2) dt + sigma sqrt(dt) eps)`, which is
//! distributionally exact for GBM at any step size and always positive.
//! In both, `eps` is the vector of correlated draws `B z` with `B` the
//! Cholesky factor of the asset correlation matrix.
//!
//! Normal variates come from a Box-Muller transform over ChaCha8 uniforms;
//! this choice is fixed so that seeded outputs are stable. Each path uses
//! its own counter-derived ChaCha8 stream `(seed, path index)`, so results
//! do not depend on how paths are scheduled across threads.

use crate::market::{MarketError, ModelParams};
use ndarray::{Array2, Array3, ArrayView2, Axis};
use ndarray::parallel::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("correlation matrix is not positive semi-definite: pivot {pivot} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("n_paths must be at least 1")]
    ZeroPaths,
    #[error("n_steps must be at least 1")]
    ZeroSteps,
    #[error("maturity must be positive, got {0}")]
    InvalidMaturity(f64),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Time-stepping scheme for [`simulate_paths`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Literal first-order update; may produce negative prices.
    ArithmeticEuler,
    /// Exact GBM transition; strictly positive, no discretization bias.
    #[default]
    ExactLognormal,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ArithmeticEuler => write!(f, "arithmetic_euler"),
            Scheme::ExactLognormal => write!(f, "exact_lognormal"),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arithmetic_euler" | "euler" => Ok(Scheme::ArithmeticEuler),
            "exact_lognormal" | "exact" => Ok(Scheme::ExactLognormal),
            other => Err(format!(
                "unknown scheme '{other}' (expected arithmetic_euler or exact_lognormal)"
            )),
        }
    }
}

/// Lower-triangular factor `B` with `B Bt` equal to the input correlation.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    matrix: Array2<f64>,
}

impl CholeskyFactor {
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `out = B z`, exploiting lower-triangular structure.
    pub fn correlate(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.matrix[[i, j]] * z[j];
            }
            out[i] = acc;
        }
    }
}

/// Cholesky factorization of a correlation matrix.
///
/// Pivots in `[-1e-12, 0]` are treated as exact zeros so that valid rank
/// deficient matrices (for example perfectly correlated assets) factorize;
/// anything below that band reports `NotPositiveDefinite`.
pub fn cholesky(correlation: ArrayView2<f64>) -> Result<CholeskyFactor, PathError> {
    const PIVOT_TOL: f64 = 1e-12;
    let n = correlation.nrows();
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut acc = correlation[[i, j]];
            for k in 0..j {
                acc -= b[[i, k]] * b[[j, k]];
            }
            if i == j {
                if acc < -PIVOT_TOL {
                    return Err(PathError::NotPositiveDefinite {
                        index: i,
                        pivot: acc,
                    });
                }
                b[[i, j]] = acc.max(0.0).sqrt();
            } else {
                let pivot = b[[j, j]];
                b[[i, j]] = if pivot > 0.0 { acc / pivot } else { 0.0 };
            }
        }
    }
    Ok(CholeskyFactor { matrix: b })
}

/// Deterministic standard-normal source: Box-Muller over ChaCha8 uniforms.
///
/// The transform consumes two uniforms and yields two normals; the second
/// is cached and returned by the following call.
pub struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        Self::for_stream(seed, 0)
    }

    /// Independent substream `stream` of the generator seeded with `seed`.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u maps the uniform from [0, 1) onto (0, 1], keeping ln finite.
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for slot in out {
            *slot = self.next_normal();
        }
    }
}

/// `count` standard normal samples, bitwise reproducible for a fixed seed.
pub fn standard_normals(seed: u64, count: usize) -> Vec<f64> {
    let mut source = NormalSource::new(seed);
    let mut out = vec![0.0; count];
    source.fill(&mut out);
    out
}

/// An immutable bundle of simulated paths plus the grid they live on.
///
/// `values` is indexed `[path, time index, asset]`; time index 0 holds the
/// initial spots.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub values: Array3<f64>,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    pub fn n_steps(&self) -> usize {
        self.values.len_of(Axis(1)) - 1
    }

    pub fn n_assets(&self) -> usize {
        self.values.len_of(Axis(2))
    }

    /// Prices of all assets on `path` at time index `step`.
    pub fn at(&self, path: usize, step: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.slice(ndarray::s![path, step, ..])
    }

    /// Debug dump, one row per (path, step, asset).
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "path,step,asset,time,price")?;
        for p in 0..self.n_paths() {
            for j in 0..=self.n_steps() {
                for a in 0..self.n_assets() {
                    writeln!(
                        w,
                        "{p},{j},{a},{},{}",
                        self.t_grid[j],
                        self.values[[p, j, a]]
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// One time step for every asset of one path. `eps` already carries the
/// correlation; the caller reuses this for terminal sampling so the two
/// entry points share identical floating-point arithmetic.
#[inline]
fn advance(
    scheme: Scheme,
    rate: f64,
    vols: &[f64],
    dt: f64,
    sqrt_dt: f64,
    prev: &[f64],
    eps: &[f64],
    out: &mut [f64],
) {
    match scheme {
        Scheme::ArithmeticEuler => {
            for i in 0..prev.len() {
                out[i] = prev[i] * (1.0 + rate * dt + vols[i] * sqrt_dt * eps[i]);
            }
        }
        Scheme::ExactLognormal => {
            for i in 0..prev.len() {
                let drift = (rate - 0.5 * vols[i] * vols[i]) * dt;
                out[i] = prev[i] * (drift + vols[i] * sqrt_dt * eps[i]).exp();
            }
        }
    }
}

/// Simulate `n_paths` correlated GBM paths on a uniform grid of `n_steps`
/// steps over `[0, maturity]`.
///
/// Fully determined by `(params, n_paths, n_steps, maturity, scheme, seed)`;
/// paths are generated in parallel but each draws from its own substream,
/// so the output is identical at any thread count.
pub fn simulate_paths(
    params: &ModelParams,
    n_paths: usize,
    n_steps: usize,
    maturity: f64,
    scheme: Scheme,
    seed: u64,
) -> Result<PathSet, PathError> {
    params.validate()?;
    if n_paths == 0 {
        return Err(PathError::ZeroPaths);
    }
    if n_steps == 0 {
        return Err(PathError::ZeroSteps);
    }
    if !(maturity > 0.0) {
        return Err(PathError::InvalidMaturity(maturity));
    }
    let n_assets = params.n_assets();
    let factor = cholesky(params.correlation.view())?;
    let dt = maturity / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let t_grid: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();

    let mut values = Array3::<f64>::zeros((n_paths, n_steps + 1, n_assets));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(p, mut path)| {
            let mut source = NormalSource::for_stream(seed, p as u64);
            let mut z = vec![0.0; n_assets];
            let mut eps = vec![0.0; n_assets];
            let mut prev = params.spots.clone();
            let mut next = vec![0.0; n_assets];
            for (i, &s) in params.spots.iter().enumerate() {
                path[[0, i]] = s;
            }
            for j in 1..=n_steps {
                source.fill(&mut z);
                factor.correlate(&z, &mut eps);
                advance(
                    scheme,
                    params.rate,
                    &params.vols,
                    dt,
                    sqrt_dt,
                    &prev,
                    &eps,
                    &mut next,
                );
                for i in 0..n_assets {
                    path[[j, i]] = next[i];
                }
                std::mem::swap(&mut prev, &mut next);
            }
        });

    Ok(PathSet {
        values,
        dt,
        t_grid,
        seed,
        scheme,
    })
}

/// Sample terminal prices `S(T)` directly with one exact lognormal step.
///
/// Bitwise-identical to `simulate_paths(.., n_steps = 1, ExactLognormal, ..)`
/// restricted to the final time index, because both share the same stepping
/// arithmetic and per-path substreams.
pub fn simulate_terminal(
    params: &ModelParams,
    n_paths: usize,
    maturity: f64,
    seed: u64,
) -> Result<Array2<f64>, PathError> {
    params.validate()?;
    if n_paths == 0 {
        return Err(PathError::ZeroPaths);
    }
    if !(maturity > 0.0) {
        return Err(PathError::InvalidMaturity(maturity));
    }
    let n_assets = params.n_assets();
    let factor = cholesky(params.correlation.view())?;
    let sqrt_t = maturity.sqrt();

    let mut terminals = Array2::<f64>::zeros((n_paths, n_assets));
    terminals
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(p, mut row)| {
            let mut source = NormalSource::for_stream(seed, p as u64);
            let mut z = vec![0.0; n_assets];
            let mut eps = vec![0.0; n_assets];
            let mut out = vec![0.0; n_assets];
            source.fill(&mut z);
            factor.correlate(&z, &mut eps);
            advance(
                Scheme::ExactLognormal,
                params.rate,
                &params.vols,
                maturity,
                sqrt_t,
                &params.spots,
                &eps,
                &mut out,
            );
            for i in 0..n_assets {
                row[i] = out[i];
            }
        });
    Ok(terminals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_identity() {
        let b = cholesky(Array2::eye(2).view()).unwrap();
        assert_eq!(b.matrix(), Array2::eye(2).view());
    }

    #[test]
    fn cholesky_half_correlation() {
        let rho = array![[1.0, 0.5], [0.5, 1.0]];
        let b = cholesky(rho.view()).unwrap();
        assert_eq!(b.matrix()[[0, 0]], 1.0);
        assert_eq!(b.matrix()[[0, 1]], 0.0);
        assert_eq!(b.matrix()[[1, 0]], 0.5);
        // sqrt(0.75) frozen from high-precision evaluation.
        assert!((b.matrix()[[1, 1]] - 0.866_025_403_784_438_6).abs() < 1e-15);
        let recon = b.matrix().dot(&b.matrix().t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((recon[[i, j]] - rho[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let rho = array![[1.0, 1.5], [1.5, 1.0]];
        assert!(matches!(
            cholesky(rho.view()),
            Err(PathError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn cholesky_clamps_semidefinite_pivot() {
        let rho = array![[1.0, 1.0], [1.0, 1.0]];
        let b = cholesky(rho.view()).unwrap();
        assert_eq!(b.matrix()[[1, 1]], 0.0);
        let recon = b.matrix().dot(&b.matrix().t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((recon[[i, j]] - rho[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standard_normals_deterministic() {
        let a = standard_normals(42, 64);
        let b = standard_normals(42, 64);
        assert_eq!(a, b);
        let c = standard_normals(43, 64);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_vol_exact_paths_follow_deterministic_drift() {
        let params = ModelParams::single_asset(100.0, 0.04, 0.0).unwrap();
        let ps = simulate_paths(&params, 3, 8, 2.0, Scheme::ExactLognormal, 7).unwrap();
        for p in 0..3 {
            for j in 0..=8 {
                let expected = 100.0 * (0.04 * ps.t_grid[j]).exp();
                assert!((ps.values[[p, j, 0]] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_vol_euler_paths_compound_discretely() {
        let params = ModelParams::single_asset(100.0, 0.04, 0.0).unwrap();
        let ps = simulate_paths(&params, 2, 4, 1.0, Scheme::ArithmeticEuler, 7).unwrap();
        let dt = 0.25f64;
        for j in 0..=4 {
            let expected = 100.0 * (1.0 + 0.04 * dt).powi(j as i32);
            assert!((ps.values[[0, j, 0]] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn paths_start_at_spot() {
        let params = ModelParams::new(
            vec![100.0, 90.0],
            0.04,
            vec![0.2, 0.3],
            array![[1.0, 0.5], [0.5, 1.0]],
        )
        .unwrap();
        let ps = simulate_paths(&params, 16, 5, 1.0, Scheme::ExactLognormal, 3).unwrap();
        for p in 0..16 {
            assert_eq!(ps.values[[p, 0, 0]], 100.0);
            assert_eq!(ps.values[[p, 0, 1]], 90.0);
        }
        assert_eq!(ps.n_paths(), 16);
        assert_eq!(ps.n_steps(), 5);
        assert_eq!(ps.n_assets(), 2);
    }

    #[test]
    fn exact_scheme_is_strictly_positive() {
        let params = ModelParams::single_asset(100.0, 0.04, 0.9).unwrap();
        let ps = simulate_paths(&params, 200, 12, 2.0, Scheme::ExactLognormal, 11).unwrap();
        assert!(ps.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn terminal_matches_one_step_path_bitwise() {
        let params = ModelParams::new(
            vec![100.0, 80.0],
            0.03,
            vec![0.25, 0.4],
            array![[1.0, -0.3], [-0.3, 1.0]],
        )
        .unwrap();
        let terminals = simulate_terminal(&params, 64, 1.5, 99).unwrap();
        let ps = simulate_paths(&params, 64, 1, 1.5, Scheme::ExactLognormal, 99).unwrap();
        for p in 0..64 {
            for a in 0..2 {
                assert_eq!(terminals[[p, a]], ps.values[[p, 1, a]]);
            }
        }
    }

    #[test]
    fn zero_vol_terminal_is_forward() {
        let params = ModelParams::single_asset(100.0, 0.04, 0.0).unwrap();
        let t = simulate_terminal(&params, 5, 1.0, 1).unwrap();
        let fwd = 100.0 * (0.04f64).exp();
        for p in 0..5 {
            assert!((t[[p, 0]] - fwd).abs() < 1e-10);
        }
    }

    #[test]
    fn simulation_rejects_degenerate_requests() {
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        assert!(matches!(
            simulate_paths(&params, 0, 10, 1.0, Scheme::ExactLognormal, 1),
            Err(PathError::ZeroPaths)
        ));
        assert!(matches!(
            simulate_paths(&params, 10, 0, 1.0, Scheme::ExactLognormal, 1),
            Err(PathError::ZeroSteps)
        ));
        assert!(matches!(
            simulate_paths(&params, 10, 10, -1.0, Scheme::ExactLognormal, 1),
            Err(PathError::InvalidMaturity(_))
        ));
    }

    #[test]
    fn csv_dump_layout() {
        let params = ModelParams::single_asset(100.0, 0.0, 0.0).unwrap();
        let ps = simulate_paths(&params, 2, 2, 1.0, Scheme::ExactLognormal, 1).unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path,step,asset,time,price");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert_eq!(lines[1], "0,0,0,0,100");
        assert_eq!(lines[2], "0,1,0,0.5,100");
    }

    #[test]
    fn scheme_round_trips_through_strings() {
        for s in [Scheme::ArithmeticEuler, Scheme::ExactLognormal] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("fancy".parse::<Scheme>().is_err());
    }
}
