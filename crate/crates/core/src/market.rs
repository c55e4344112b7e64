//! Contract and market-parameter types, payoff evaluation, discounting, and
//! the Black-Scholes closed form used as a verification oracle.

use ndarray::{Array2, ArrayView2};
use std::time::Duration;
use thiserror::Error;

/// Tolerance for symmetry / unit-diagonal checks on correlation inputs.
const CORR_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("strike must be positive, got {0}")]
    InvalidStrike(f64),
    #[error("maturity must be positive, got {0}")]
    InvalidMaturity(f64),
    #[error("spot must be positive, got {0}")]
    InvalidSpot(f64),
    #[error("volatility must be non-negative, got {0}")]
    InvalidVol(f64),
    #[error("discount interval is reversed: t0={t0}, t1={t1}")]
    ReversedInterval { t0: f64, t1: f64 },
    #[error("correlation matrix must be {expected}x{expected}, got {rows}x{cols}")]
    CorrelationShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("correlation matrix is not symmetric at ({i},{j})")]
    CorrelationNotSymmetric { i: usize, j: usize },
    #[error("correlation diagonal entry {i} is not 1")]
    CorrelationDiagonal { i: usize },
    #[error("correlation entry ({i},{j}) = {value} outside [-1, 1]")]
    CorrelationRange { i: usize, j: usize, value: f64 },
    #[error("spots/vols lengths disagree: {spots} spots vs {vols} vols")]
    DimensionMismatch { spots: usize, vols: usize },
    #[error("operation requires a European option")]
    EuropeanOnly,
    #[error("model has no assets")]
    NoAssets,
    #[error("unrecognized option kind '{0}', expected 'call' or 'put'")]
    UnknownKind(String),
    #[error("unrecognized exercise style '{0}', expected 'european' or 'american'")]
    UnknownStyle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

impl std::fmt::Display for OptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptionKind::Call => write!(f, "call"),
            OptionKind::Put => write!(f, "put"),
        }
    }
}

impl std::str::FromStr for OptionKind {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            other => Err(MarketError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseStyle {
    European,
    American,
}

impl std::fmt::Display for ExerciseStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExerciseStyle::European => write!(f, "european"),
            ExerciseStyle::American => write!(f, "american"),
        }
    }
}

impl std::str::FromStr for ExerciseStyle {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "european" => Ok(ExerciseStyle::European),
            "american" => Ok(ExerciseStyle::American),
            other => Err(MarketError::UnknownStyle(other.to_string())),
        }
    }
}

/// A vanilla call or put contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub style: ExerciseStyle,
    pub strike: f64,
    pub maturity: f64,
}

impl OptionSpec {
    pub fn new(
        kind: OptionKind,
        style: ExerciseStyle,
        strike: f64,
        maturity: f64,
    ) -> Result<Self, MarketError> {
        if !(strike > 0.0) {
            return Err(MarketError::InvalidStrike(strike));
        }
        if !(maturity > 0.0) {
            return Err(MarketError::InvalidMaturity(maturity));
        }
        Ok(Self {
            kind,
            style,
            strike,
            maturity,
        })
    }

    pub fn european_put(strike: f64, maturity: f64) -> Result<Self, MarketError> {
        Self::new(OptionKind::Put, ExerciseStyle::European, strike, maturity)
    }

    pub fn european_call(strike: f64, maturity: f64) -> Result<Self, MarketError> {
        Self::new(OptionKind::Call, ExerciseStyle::European, strike, maturity)
    }

    pub fn american_put(strike: f64, maturity: f64) -> Result<Self, MarketError> {
        Self::new(OptionKind::Put, ExerciseStyle::American, strike, maturity)
    }

    pub fn american_call(strike: f64, maturity: f64) -> Result<Self, MarketError> {
        Self::new(OptionKind::Call, ExerciseStyle::American, strike, maturity)
    }
}

/// Risk-neutral market model: initial prices, constant short rate, per-asset
/// volatilities and the asset correlation matrix.
///
/// Construction validates shapes, positivity, symmetry, the unit diagonal and
/// the [-1, 1] range. Positive semi-definiteness is established later by the
/// Cholesky factorization that every path simulation performs.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub spots: Vec<f64>,
    pub rate: f64,
    pub vols: Vec<f64>,
    pub correlation: Array2<f64>,
}

impl ModelParams {
    pub fn new(
        spots: Vec<f64>,
        rate: f64,
        vols: Vec<f64>,
        correlation: Array2<f64>,
    ) -> Result<Self, MarketError> {
        let params = Self {
            spots,
            rate,
            vols,
            correlation,
        };
        params.validate()?;
        Ok(params)
    }

    /// Re-check every construction invariant. Fields are public, so code
    /// that consumes a `ModelParams` built elsewhere can revalidate cheaply.
    pub fn validate(&self) -> Result<(), MarketError> {
        if self.spots.is_empty() {
            return Err(MarketError::NoAssets);
        }
        if self.spots.len() != self.vols.len() {
            return Err(MarketError::DimensionMismatch {
                spots: self.spots.len(),
                vols: self.vols.len(),
            });
        }
        for &s in &self.spots {
            if !(s > 0.0) {
                return Err(MarketError::InvalidSpot(s));
            }
        }
        for &v in &self.vols {
            if !(v >= 0.0) {
                return Err(MarketError::InvalidVol(v));
            }
        }
        validate_correlation(self.correlation.view(), self.spots.len())
    }

    /// Single-asset model with a trivial 1x1 correlation.
    pub fn single_asset(spot: f64, rate: f64, vol: f64) -> Result<Self, MarketError> {
        Self::new(vec![spot], rate, vec![vol], Array2::eye(1))
    }

    pub fn n_assets(&self) -> usize {
        self.spots.len()
    }
}

fn validate_correlation(corr: ArrayView2<f64>, n: usize) -> Result<(), MarketError> {
    let (rows, cols) = corr.dim();
    if rows != n || cols != n {
        return Err(MarketError::CorrelationShape {
            expected: n,
            rows,
            cols,
        });
    }
    for i in 0..n {
        if (corr[[i, i]] - 1.0).abs() > CORR_TOL {
            return Err(MarketError::CorrelationDiagonal { i });
        }
        for j in 0..n {
            let v = corr[[i, j]];
            if !(v.abs() <= 1.0 + CORR_TOL) {
                return Err(MarketError::CorrelationRange { i, j, value: v });
            }
            if (v - corr[[j, i]]).abs() > CORR_TOL {
                return Err(MarketError::CorrelationNotSymmetric { i, j });
            }
        }
    }
    Ok(())
}

/// Price estimate with its Monte Carlo uncertainty and run bookkeeping.
#[derive(Debug, Clone)]
pub struct PricingResult {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub elapsed: Duration,
}

/// Immediate exercise value `max(S-K, 0)` for calls, `max(K-S, 0)` for puts.
///
/// Total on all finite spots, including the negative prices an arithmetic
/// Euler path can produce.
pub fn payoff(spec: &OptionSpec, spot: f64) -> f64 {
    match spec.kind {
        OptionKind::Call => (spot - spec.strike).max(0.0),
        OptionKind::Put => (spec.strike - spot).max(0.0),
    }
}

/// Discount factor `exp(-rate * (t1 - t0))` for a constant short rate.
pub fn discount_factor(rate: f64, t0: f64, t1: f64) -> Result<f64, MarketError> {
    if t1 < t0 {
        return Err(MarketError::ReversedInterval { t0, t1 });
    }
    Ok((-rate * (t1 - t0)).exp())
}

/// Standard normal CDF.
///
/// Hart's 1968 double-precision rational approximation (the form given by
/// West, "Better approximations to cumulative normal functions"): a degree
/// 6/7 rational fit below |x| = 7.07, a continued-fraction tail above, hard
/// 0/1 beyond |x| = 37. Absolute error is below 1e-15 on the whole axis.
pub fn norm_cdf(x: f64) -> f64 {
    let xabs = x.abs();
    let tail = if xabs > 37.0 {
        0.0
    } else {
        let e = (-xabs * xabs / 2.0).exp();
        if xabs < 7.071_067_811_865_47 {
            let mut b = 3.526_249_659_989_11e-2 * xabs + 0.700_383_064_443_688;
            b = b * xabs + 6.373_962_203_531_65;
            b = b * xabs + 33.912_866_078_383;
            b = b * xabs + 112.079_291_497_871;
            b = b * xabs + 221.213_596_169_931;
            b = b * xabs + 220.206_867_912_376;
            let num = e * b;
            b = 8.838_834_764_831_84e-2 * xabs + 1.755_667_163_182_64;
            b = b * xabs + 16.064_177_579_207;
            b = b * xabs + 86.780_732_202_946_1;
            b = b * xabs + 296.564_248_779_674;
            b = b * xabs + 637.333_633_378_831;
            b = b * xabs + 793.826_512_519_948;
            b = b * xabs + 440.413_735_824_752;
            num / b
        } else {
            let mut b = xabs + 0.65;
            b = xabs + 4.0 / b;
            b = xabs + 3.0 / b;
            b = xabs + 2.0 / b;
            b = xabs + 1.0 / b;
            e / b / 2.506_628_274_631
        }
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Closed-form Black-Scholes price of a European option on a single
/// lognormal asset. Serves as the oracle for European Monte Carlo pricing.
///
/// At zero volatility the price degenerates to the discounted payoff of the
/// deterministic forward `spot * exp(rate * maturity)`.
pub fn black_scholes_price(
    spec: &OptionSpec,
    spot: f64,
    rate: f64,
    vol: f64,
) -> Result<f64, MarketError> {
    if spec.style != ExerciseStyle::European {
        return Err(MarketError::EuropeanOnly);
    }
    if !(spot > 0.0) {
        return Err(MarketError::InvalidSpot(spot));
    }
    if !(vol >= 0.0) {
        return Err(MarketError::InvalidVol(vol));
    }
    let (k, t) = (spec.strike, spec.maturity);
    let df = (-rate * t).exp();
    if vol == 0.0 {
        let forward = spot * (rate * t).exp();
        return Ok(df * payoff(spec, forward));
    }
    let sig_sqrt_t = vol * t.sqrt();
    let d1 = ((spot / k).ln() + (rate + 0.5 * vol * vol) * t) / sig_sqrt_t;
    let d2 = d1 - sig_sqrt_t;
    let price = match spec.kind {
        OptionKind::Call => spot * norm_cdf(d1) - k * df * norm_cdf(d2),
        OptionKind::Put => k * df * norm_cdf(-d2) - spot * norm_cdf(-d1),
    };
    Ok(price)
}
