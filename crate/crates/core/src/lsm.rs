//! European Monte Carlo pricing, least-squares Monte Carlo backward
//! induction for American options, and a binomial-lattice verification
//! oracle.
//!
//! The backward induction follows the classic scheme: terminal values are
//! the payoffs, and at each earlier exercise date the continuation value is
//! estimated by regressing the discounted downstream value onto the current
//! state. Exercise is decided only on paths with a positive immediate
//! payoff (exercising for nothing is never rational) and is not evaluated
//! at time zero; the price is the discounted value carried back from the
//! first exercise date.

use crate::market::{
    ExerciseStyle, MarketError, ModelParams, OptionSpec, PricingResult, payoff,
};
use crate::paths::{PathError, Scheme, simulate_paths, simulate_terminal};
use crate::regression::{EstimatorSpec, RegressionError};
use ndarray::{Array1, Array2};
use std::io;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LsmError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("estimator failed at step {step} (t = {time}): {source}")]
    EstimatorFailure {
        step: usize,
        time: f64,
        source: RegressionError,
    },
    #[error("option style must be {expected} for this operation")]
    WrongStyle { expected: ExerciseStyle },
    #[error("invalid pricing configuration: {0}")]
    InvalidConfig(String),
    #[error("no exercise-decision records to flatten")]
    EmptyDataset,
}

/// How the per-path value is updated after the exercise decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Exercised paths take the payoff; the rest keep their realized
    /// discounted downstream cashflow.
    #[default]
    RealizedCashflow,
    /// Every path's value becomes `max(estimated continuation, payoff)`;
    /// the regression estimate replaces the realized cashflow.
    ContinuationValue,
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateRule::RealizedCashflow => write!(f, "realized_cashflow"),
            UpdateRule::ContinuationValue => write!(f, "continuation_value"),
        }
    }
}

impl FromStr for UpdateRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realized_cashflow" => Ok(UpdateRule::RealizedCashflow),
            "continuation_value" => Ok(UpdateRule::ContinuationValue),
            other => Err(format!(
                "unknown update rule '{other}' (expected realized_cashflow or continuation_value)"
            )),
        }
    }
}

/// Which paths enter the regression fit at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressionScope {
    /// Only paths whose immediate payoff is positive (classic choice).
    #[default]
    InTheMoneyOnly,
    AllPaths,
}

impl std::fmt::Display for RegressionScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegressionScope::InTheMoneyOnly => write!(f, "in_the_money_only"),
            RegressionScope::AllPaths => write!(f, "all_paths"),
        }
    }
}

impl FromStr for RegressionScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_the_money_only" | "itm" => Ok(RegressionScope::InTheMoneyOnly),
            "all_paths" | "all" => Ok(RegressionScope::AllPaths),
            other => Err(format!(
                "unknown regression scope '{other}' (expected in_the_money_only or all_paths)"
            )),
        }
    }
}

/// How the exercise decision is made from the fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DecisionMode {
    /// Exercise when payoff exceeds the estimated continuation value.
    #[default]
    Regression,
    /// Exercise when the classifier's exercise probability exceeds the
    /// threshold; labels compare payoff against the realized discounted
    /// downstream value.
    Classifier { threshold: f64 },
}

#[derive(Debug, Clone)]
pub struct LsmConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub estimator: EstimatorSpec,
    pub update_rule: UpdateRule,
    pub regression_scope: RegressionScope,
    pub decision_mode: DecisionMode,
    pub seed: u64,
    pub scheme: Scheme,
}

impl LsmConfig {
    pub fn new(n_paths: usize, n_steps: usize, estimator: EstimatorSpec, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            estimator,
            update_rule: UpdateRule::default(),
            regression_scope: RegressionScope::default(),
            decision_mode: DecisionMode::default(),
            seed,
            scheme: Scheme::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LsmError> {
        if self.n_paths < 2 {
            return Err(LsmError::InvalidConfig(format!(
                "n_paths must be at least 2, got {}",
                self.n_paths
            )));
        }
        if self.n_steps == 0 {
            return Err(LsmError::InvalidConfig("n_steps must be at least 1".into()));
        }
        match self.decision_mode {
            DecisionMode::Regression => {
                if self.estimator.build_regressor().is_none() {
                    return Err(LsmError::InvalidConfig(format!(
                        "estimator '{}' is a classifier; regression decision mode needs a \
                         continuation-value regressor",
                        self.estimator.name()
                    )));
                }
            }
            DecisionMode::Classifier { threshold } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(LsmError::InvalidConfig(format!(
                        "classifier threshold must lie in (0, 1), got {threshold}"
                    )));
                }
                if self.estimator.build_classifier().is_none() {
                    return Err(LsmError::InvalidConfig(format!(
                        "classifier decision mode requires the logistic estimator, got '{}'",
                        self.estimator.name()
                    )));
                }
                if self.update_rule == UpdateRule::ContinuationValue {
                    return Err(LsmError::InvalidConfig(
                        "continuation_value update needs an estimated continuation value, \
                         which classifier mode does not produce"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One exercise decision on one path at one step, captured for the
/// classification diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseDecisionRecord {
    pub step: usize,
    /// Time in years corresponding to `step`.
    pub time: f64,
    pub state: Vec<f64>,
    pub payoff: f64,
    /// Regression mode: the estimated continuation value; classifier mode:
    /// the realized discounted downstream value the label was built from.
    pub continuation: f64,
    pub exercised: bool,
}

/// Priced result plus decision capture and fit bookkeeping.
#[derive(Debug, Clone)]
pub struct LsmOutcome {
    pub result: PricingResult,
    pub records: Vec<ExerciseDecisionRecord>,
    /// Steps where the regression degenerated (too few or collinear
    /// samples) and the engine fell back to "never exercise here".
    pub degraded_steps: usize,
    /// Estimator hyperparameter summary.
    pub estimator: String,
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Price a European option by exact terminal sampling: average the
/// discounted payoffs over `n_paths` draws of `S(T)`. The payoff applies
/// to the first asset; any further correlated assets are simulated but do
/// not enter the contract.
pub fn price_european_mc(
    spec: &OptionSpec,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
) -> Result<PricingResult, LsmError> {
    let start = Instant::now();
    if spec.style != ExerciseStyle::European {
        return Err(LsmError::WrongStyle {
            expected: ExerciseStyle::European,
        });
    }
    let terminals = simulate_terminal(params, n_paths, spec.maturity, seed)?;
    let df = (-params.rate * spec.maturity).exp();
    let discounted: Vec<f64> = terminals
        .column(0)
        .iter()
        .map(|&s| df * payoff(spec, s))
        .collect();
    let (price, std_error) = mean_and_std_error(&discounted);
    Ok(PricingResult {
        price,
        std_error,
        n_paths,
        n_steps: 1,
        elapsed: start.elapsed(),
    })
}

fn is_degenerate_fit(err: &RegressionError) -> bool {
    matches!(
        err,
        RegressionError::SingularSystem { .. }
            | RegressionError::KTooLarge { .. }
            | RegressionError::EmptyTrainingSet
    )
}

fn states_matrix(
    paths: &ndarray::Array3<f64>,
    rows: &[usize],
    step: usize,
    n_assets: usize,
) -> Array2<f64> {
    let mut x = Array2::zeros((rows.len(), n_assets));
    for (r, &j) in rows.iter().enumerate() {
        for a in 0..n_assets {
            x[[r, a]] = paths[[j, step, a]];
        }
    }
    x
}

/// Price an American option by least-squares Monte Carlo.
///
/// The payoff is evaluated on the first asset; any additional correlated
/// assets enter the continuation regression as extra state variables.
///
/// Backward induction over the exercise dates `t_1 .. t_{n_steps}`:
/// terminal values are payoffs; at each earlier date the per-path value is
/// discounted one step, an estimator is fitted on the scoped paths against
/// those discounted values, and paths with positive payoff decide between
/// exercising and continuing. Decision records for every considered
/// (path, step) pair are returned alongside the price.
pub fn price_american_lsm(
    spec: &OptionSpec,
    params: &ModelParams,
    cfg: &LsmConfig,
) -> Result<LsmOutcome, LsmError> {
    let start = Instant::now();
    if spec.style != ExerciseStyle::American {
        return Err(LsmError::WrongStyle {
            expected: ExerciseStyle::American,
        });
    }
    cfg.validate()?;

    let paths = simulate_paths(
        params,
        cfg.n_paths,
        cfg.n_steps,
        spec.maturity,
        cfg.scheme,
        cfg.seed,
    )?;
    let n = cfg.n_paths;
    let last = cfg.n_steps;
    let n_assets = params.n_assets();
    let df = (-params.rate * paths.dt).exp();

    let mut value: Vec<f64> = (0..n)
        .map(|j| payoff(spec, paths.values[[j, last, 0]]))
        .collect();
    let mut records = Vec::new();
    let mut degraded_steps = 0usize;

    for step in (1..last).rev() {
        for v in &mut value {
            *v *= df;
        }
        let h: Vec<f64> = (0..n)
            .map(|j| payoff(spec, paths.values[[j, step, 0]]))
            .collect();
        let decision_rows: Vec<usize> = (0..n).filter(|&j| h[j] > 0.0).collect();
        if decision_rows.is_empty() {
            continue;
        }
        let fit_rows: Vec<usize> = match cfg.regression_scope {
            RegressionScope::InTheMoneyOnly => decision_rows.clone(),
            RegressionScope::AllPaths => (0..n).collect(),
        };
        let x_fit = states_matrix(&paths.values, &fit_rows, step, n_assets);
        let time = paths.t_grid[step];
        let fail = |source: RegressionError| LsmError::EstimatorFailure { step, time, source };

        match cfg.decision_mode {
            DecisionMode::Regression => {
                let y_fit = Array1::from_iter(fit_rows.iter().map(|&j| value[j]));
                let mut estimator = cfg
                    .estimator
                    .build_regressor()
                    .expect("validated regression mode");
                match estimator.fit(x_fit.view(), y_fit.view()) {
                    Ok(()) => {}
                    Err(e) if is_degenerate_fit(&e) => {
                        degraded_steps += 1;
                        continue;
                    }
                    Err(e) => return Err(fail(e)),
                }
                match cfg.update_rule {
                    UpdateRule::RealizedCashflow => {
                        let x_dec = states_matrix(&paths.values, &decision_rows, step, n_assets);
                        let c = estimator.predict(x_dec.view()).map_err(fail)?;
                        for (r, &j) in decision_rows.iter().enumerate() {
                            let exercised = h[j] > c[r];
                            records.push(ExerciseDecisionRecord {
                                step,
                                time,
                                state: x_dec.row(r).to_vec(),
                                payoff: h[j],
                                continuation: c[r],
                                exercised,
                            });
                            if exercised {
                                value[j] = h[j];
                            }
                        }
                    }
                    UpdateRule::ContinuationValue => {
                        // The estimate replaces the realized value only on
                        // the decision set; out-of-the-money paths keep
                        // their realized cashflow rather than taking an
                        // extrapolated regression value.
                        let x_dec = states_matrix(&paths.values, &decision_rows, step, n_assets);
                        let c = estimator.predict(x_dec.view()).map_err(fail)?;
                        for (r, &j) in decision_rows.iter().enumerate() {
                            records.push(ExerciseDecisionRecord {
                                step,
                                time,
                                state: x_dec.row(r).to_vec(),
                                payoff: h[j],
                                continuation: c[r],
                                exercised: h[j] > c[r],
                            });
                            value[j] = c[r].max(h[j]);
                        }
                    }
                }
            }
            DecisionMode::Classifier { threshold } => {
                let labels = Array1::from_iter(
                    fit_rows
                        .iter()
                        .map(|&j| if h[j] > value[j] { 1.0 } else { 0.0 }),
                );
                let mut classifier = cfg
                    .estimator
                    .build_classifier()
                    .expect("validated classifier mode");
                match classifier.fit(x_fit.view(), labels.view()) {
                    Ok(()) => {}
                    Err(e) if is_degenerate_fit(&e) => {
                        degraded_steps += 1;
                        continue;
                    }
                    Err(e) => return Err(fail(e)),
                }
                let x_dec = states_matrix(&paths.values, &decision_rows, step, n_assets);
                let proba = classifier.predict_proba(x_dec.view()).map_err(fail)?;
                for (r, &j) in decision_rows.iter().enumerate() {
                    let exercised = proba[r] > threshold;
                    records.push(ExerciseDecisionRecord {
                        step,
                        time,
                        state: x_dec.row(r).to_vec(),
                        payoff: h[j],
                        continuation: value[j],
                        exercised,
                    });
                    if exercised {
                        value[j] = h[j];
                    }
                }
            }
        }
    }

    let discounted: Vec<f64> = value.iter().map(|v| v * df).collect();
    let (price, std_error) = mean_and_std_error(&discounted);
    Ok(LsmOutcome {
        result: PricingResult {
            price,
            std_error,
            n_paths: n,
            n_steps: last,
            elapsed: start.elapsed(),
        },
        records,
        degraded_steps,
        estimator: cfg.estimator.describe(),
    })
}

/// Cox-Ross-Rubinstein lattice price for a single-asset American option.
///
/// `u = exp(sigma sqrt(dt))`, `d = 1/u`, risk-neutral up-probability
/// `(exp(r dt) - d)/(u - d)`; backward induction takes the maximum of
/// immediate exercise and the discounted expectation at every node,
/// including the root. Zero volatility degenerates to optimal stopping on
/// the deterministic forward path.
pub fn price_american_binomial(
    spec: &OptionSpec,
    spot: f64,
    rate: f64,
    vol: f64,
    n_steps: usize,
) -> Result<f64, LsmError> {
    if spec.style != ExerciseStyle::American {
        return Err(LsmError::WrongStyle {
            expected: ExerciseStyle::American,
        });
    }
    if !(spot > 0.0) {
        return Err(MarketError::InvalidSpot(spot).into());
    }
    if !(vol >= 0.0) {
        return Err(MarketError::InvalidVol(vol).into());
    }
    if n_steps == 0 {
        return Err(LsmError::InvalidConfig("n_steps must be at least 1".into()));
    }
    let t = spec.maturity;
    let dt = t / n_steps as f64;

    if vol == 0.0 {
        let mut best = payoff(spec, spot);
        for i in 1..=n_steps {
            let ti = i as f64 * dt;
            let v = (-rate * ti).exp() * payoff(spec, spot * (rate * ti).exp());
            best = best.max(v);
        }
        return Ok(best);
    }

    let u = (vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (rate * dt).exp();
    let p = (growth - d) / (u - d);
    if !(0.0..=1.0).contains(&p) {
        return Err(LsmError::InvalidConfig(format!(
            "risk-neutral probability {p:.4} outside [0, 1]; increase n_steps"
        )));
    }
    let disc = (-rate * dt).exp();

    let mut values: Vec<f64> = (0..=n_steps)
        .map(|j| payoff(spec, spot * u.powi(2 * j as i32 - n_steps as i32)))
        .collect();
    for step in (0..n_steps).rev() {
        for j in 0..=step {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            let s = spot * u.powi(2 * j as i32 - step as i32);
            values[j] = cont.max(payoff(spec, s));
        }
        values.truncate(step + 1);
    }
    Ok(values[0])
}

/// Flatten decision records into a feature matrix (state columns, then
/// payoff, then time in years) and 0/1 exercise labels.
pub fn exercise_dataset(
    records: &[ExerciseDecisionRecord],
) -> Result<(Array2<f64>, Array1<f64>), LsmError> {
    if records.is_empty() {
        return Err(LsmError::EmptyDataset);
    }
    let d = records[0].state.len() + 2;
    let mut features = Array2::zeros((records.len(), d));
    let mut labels = Array1::zeros(records.len());
    for (i, rec) in records.iter().enumerate() {
        for (a, &s) in rec.state.iter().enumerate() {
            features[[i, a]] = s;
        }
        features[[i, d - 2]] = rec.payoff;
        features[[i, d - 1]] = rec.time;
        labels[i] = if rec.exercised { 1.0 } else { 0.0 };
    }
    Ok((features, labels))
}

/// Decision-record dump: `step,state_0..,payoff,continuation,label`.
pub fn write_records_csv<W: io::Write>(
    records: &[ExerciseDecisionRecord],
    w: &mut W,
) -> io::Result<()> {
    let n_assets = records.first().map_or(1, |r| r.state.len());
    write!(w, "step")?;
    for a in 0..n_assets {
        write!(w, ",state_{a}")?;
    }
    writeln!(w, ",payoff,continuation,label")?;
    for rec in records {
        write!(w, "{}", rec.step)?;
        for s in &rec.state {
            write!(w, ",{s}")?;
        }
        writeln!(
            w,
            ",{},{},{}",
            rec.payoff,
            rec.continuation,
            rec.exercised as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{black_scholes_price, discount_factor};
    use crate::regression::{KnnConfig, LogisticConfig, PolynomialBasisConfig, Ridge};

    fn poly(order: usize) -> EstimatorSpec {
        EstimatorSpec::Polynomial(PolynomialBasisConfig::new(order))
    }

    #[test]
    fn european_zero_vol_put_is_worthless() {
        let spec = OptionSpec::european_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.0).unwrap();
        let r = price_european_mc(&spec, &params, 1000, 7).unwrap();
        assert_eq!(r.price, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn european_zero_vol_call_matches_closed_form() {
        let spec = OptionSpec::european_call(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.0).unwrap();
        let r = price_european_mc(&spec, &params, 1000, 7).unwrap();
        // 100 - 100 exp(-0.04), frozen from high-precision evaluation.
        assert!((r.price - 3.921_056_084_767_679).abs() < 1e-10);
        assert!(r.std_error < 1e-12);
    }

    #[test]
    fn european_mc_brackets_black_scholes() {
        let spec = OptionSpec::european_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let r = price_european_mc(&spec, &params, 100_000, 11).unwrap();
        let bs = black_scholes_price(&spec, 100.0, 0.04, 0.2).unwrap();
        assert!(
            (r.price - bs).abs() < 3.0 * r.std_error,
            "MC {} vs BS {bs}, se {}",
            r.price,
            r.std_error
        );
    }

    #[test]
    fn european_call_put_parity_same_seed() {
        let put = OptionSpec::european_put(100.0, 1.0).unwrap();
        let call = OptionSpec::european_call(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let rp = price_european_mc(&put, &params, 100_000, 5).unwrap();
        let rc = price_european_mc(&call, &params, 100_000, 5).unwrap();
        let parity = 100.0 - 100.0 * discount_factor(0.04, 0.0, 1.0).unwrap();
        let combined = (rp.std_error.powi(2) + rc.std_error.powi(2)).sqrt();
        assert!(
            (rc.price - rp.price - parity).abs() < 3.0 * combined,
            "parity gap {}",
            rc.price - rp.price - parity
        );
    }

    #[test]
    fn european_rejects_american_style() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        assert!(matches!(
            price_european_mc(&spec, &params, 10, 1),
            Err(LsmError::WrongStyle { .. })
        ));
    }

    #[test]
    fn binomial_zero_vol_deep_itm_put_is_intrinsic() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let p = price_american_binomial(&spec, 80.0, 0.04, 0.0, 50).unwrap();
        assert_eq!(p, 20.0);
    }

    #[test]
    fn binomial_matches_frozen_goldens() {
        // Frozen from an independent lattice implementation.
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let p1000 = price_american_binomial(&spec, 100.0, 0.04, 0.2, 1000).unwrap();
        let p2000 = price_american_binomial(&spec, 100.0, 0.04, 0.2, 2000).unwrap();
        assert!((p1000 - 6.403_276_679_7).abs() < 1e-6, "got {p1000}");
        assert!((p2000 - 6.403_696_722_2).abs() < 1e-6, "got {p2000}");
        // Richardson-style convergence check.
        assert!((p2000 - p1000).abs() < 0.005);
        let spec2 = OptionSpec::american_put(100.0, 1.0).unwrap();
        let q2000 = price_american_binomial(&spec2, 100.0, 0.02, 0.4, 2000).unwrap();
        assert!((q2000 - 14.896_142_338_3).abs() < 1e-6, "got {q2000}");
    }

    #[test]
    fn binomial_american_dominates_european() {
        let am = OptionSpec::american_put(100.0, 1.0).unwrap();
        let eu = OptionSpec::european_put(100.0, 1.0).unwrap();
        let lattice = price_american_binomial(&am, 100.0, 0.04, 0.2, 2000).unwrap();
        let bs = black_scholes_price(&eu, 100.0, 0.04, 0.2).unwrap();
        assert!(lattice >= bs - 1e-9);
    }

    #[test]
    fn binomial_rejects_european_style_and_bad_inputs() {
        let eu = OptionSpec::european_put(100.0, 1.0).unwrap();
        assert!(matches!(
            price_american_binomial(&eu, 100.0, 0.04, 0.2, 10),
            Err(LsmError::WrongStyle { .. })
        ));
        let am = OptionSpec::american_put(100.0, 1.0).unwrap();
        assert!(price_american_binomial(&am, -5.0, 0.04, 0.2, 10).is_err());
        assert!(price_american_binomial(&am, 100.0, 0.04, -0.2, 10).is_err());
        assert!(price_american_binomial(&am, 100.0, 0.04, 0.2, 0).is_err());
    }

    #[test]
    fn lsm_zero_vol_deep_itm_exercises_at_first_date() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(80.0, 0.04, 0.0).unwrap();
        let cfg = LsmConfig::new(64, 50, poly(2), 3);
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        // Exercise is not evaluated at time zero, so the deterministic
        // optimum is exercising at t_1 = dt: 100 exp(-0.0008) - 80, frozen
        // from high-precision evaluation. It approaches the intrinsic 20 as
        // the mesh refines.
        assert!(
            (out.result.price - 19.920_031_991_468_373).abs() < 1e-9,
            "got {}",
            out.result.price
        );
        assert!(out.result.std_error < 1e-12);
        assert_eq!(out.degraded_steps, 0);
        // Finer mesh moves the first exercise date toward zero.
        let fine = LsmConfig::new(64, 400, poly(2), 3);
        let out_fine = price_american_lsm(&spec, &params, &fine).unwrap();
        assert!(out_fine.result.price > out.result.price);
        assert!(out_fine.result.price < 20.0);
    }

    #[test]
    fn lsm_zero_vol_degenerate_regression_falls_back_to_hold() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(80.0, 0.04, 0.0).unwrap();
        // Identical states make the order-2 normal matrix singular; with
        // ridge pinned to zero every step degrades and the option is held
        // to maturity: price = 100 exp(-0.04) - 80.
        let mut cfg = LsmConfig::new(64, 50, poly(2), 3);
        cfg.estimator = EstimatorSpec::Polynomial(PolynomialBasisConfig {
            order: 2,
            ridge: Ridge::Fixed(0.0),
        });
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert_eq!(out.degraded_steps, 49);
        assert!(
            (out.result.price - 16.078_943_915_232_32).abs() < 1e-9,
            "got {}",
            out.result.price
        );
        assert!(out.records.is_empty());
    }

    #[test]
    fn lsm_classifier_mode_agrees_on_deterministic_exercise() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(80.0, 0.04, 0.0).unwrap();
        let mut cfg = LsmConfig::new(64, 50, EstimatorSpec::Logistic(LogisticConfig::default()), 3);
        cfg.decision_mode = DecisionMode::Classifier { threshold: 0.5 };
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert!(
            (out.result.price - 19.920_031_991_468_373).abs() < 1e-9,
            "got {}",
            out.result.price
        );
    }

    #[test]
    fn lsm_never_itm_reduces_to_hold_to_maturity() {
        let spec = OptionSpec::american_put(10.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.1).unwrap();
        let cfg = LsmConfig::new(256, 10, poly(2), 5);
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert_eq!(out.result.price, 0.0);
        assert!(out.records.is_empty());
        assert_eq!(out.degraded_steps, 0);
    }

    #[test]
    fn lsm_is_deterministic_across_runs() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let cfg = LsmConfig::new(2000, 10, poly(3), 42);
        let a = price_american_lsm(&spec, &params, &cfg).unwrap();
        let b = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert_eq!(a.result.price, b.result.price);
        assert_eq!(a.result.std_error, b.result.std_error);
        assert_eq!(a.records.len(), b.records.len());
    }

    #[test]
    fn lsm_tracks_binomial_oracle() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let mut cfg = LsmConfig::new(20_000, 25, poly(3), 9);
        cfg.scheme = Scheme::ExactLognormal;
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        let oracle = price_american_binomial(&spec, 100.0, 0.04, 0.2, 2000).unwrap();
        // LSM on a 25-date mesh prices a Bermudan approximation, biased a
        // touch low against the continuous-exercise lattice.
        assert!(
            out.result.price > oracle - 0.15 && out.result.price < oracle + 3.0 * out.result.std_error,
            "LSM {} vs lattice {oracle} (se {})",
            out.result.price,
            out.result.std_error
        );
    }

    #[test]
    fn lsm_dominates_european_and_intrinsic() {
        let am = OptionSpec::american_put(100.0, 1.0).unwrap();
        let eu = OptionSpec::european_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let cfg = LsmConfig::new(20_000, 25, poly(3), 17);
        let out = price_american_lsm(&am, &params, &cfg).unwrap();
        let euro = price_european_mc(&eu, &params, 20_000, 17).unwrap();
        let combined = (out.result.std_error.powi(2) + euro.std_error.powi(2)).sqrt();
        assert!(out.result.price >= euro.price - 3.0 * combined);
        assert!(out.result.price >= payoff(&am, 100.0) - 3.0 * out.result.std_error);
    }

    #[test]
    fn lsm_update_rules_stay_close() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let mut cfg = LsmConfig::new(10_000, 25, poly(3), 21);
        let realized = price_american_lsm(&spec, &params, &cfg).unwrap();
        cfg.update_rule = UpdateRule::ContinuationValue;
        let continuation = price_american_lsm(&spec, &params, &cfg).unwrap();
        // Both are estimates of the same value; no sign is asserted.
        assert!((realized.result.price - continuation.result.price).abs() < 1.0);
    }

    #[test]
    fn lsm_knn_estimator_smoke() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let cfg = LsmConfig::new(2000, 10, EstimatorSpec::Knn(KnnConfig { k: 50 }), 13);
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert!(out.result.price > 3.0 && out.result.price < 12.0);
    }

    #[test]
    fn lsm_validation_rejects_bad_configs() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let mut cfg = LsmConfig::new(1, 10, poly(2), 1);
        assert!(matches!(
            price_american_lsm(&spec, &params, &cfg),
            Err(LsmError::InvalidConfig(_))
        ));
        cfg = LsmConfig::new(100, 10, poly(2), 1);
        cfg.decision_mode = DecisionMode::Classifier { threshold: 0.5 };
        assert!(matches!(
            price_american_lsm(&spec, &params, &cfg),
            Err(LsmError::InvalidConfig(_))
        ));
        cfg = LsmConfig::new(100, 10, EstimatorSpec::Logistic(LogisticConfig::default()), 1);
        cfg.decision_mode = DecisionMode::Classifier { threshold: 1.5 };
        assert!(matches!(
            price_american_lsm(&spec, &params, &cfg),
            Err(LsmError::InvalidConfig(_))
        ));
        cfg.decision_mode = DecisionMode::Regression;
        assert!(matches!(
            price_american_lsm(&spec, &params, &cfg),
            Err(LsmError::InvalidConfig(_))
        ));
        let eu = OptionSpec::european_put(100.0, 1.0).unwrap();
        let good = LsmConfig::new(100, 10, poly(2), 1);
        assert!(matches!(
            price_american_lsm(&eu, &params, &good),
            Err(LsmError::WrongStyle { .. })
        ));
    }

    #[test]
    fn lsm_prices_with_extra_correlated_state_assets() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let single = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let mut corr = ndarray::Array2::eye(2);
        corr[[0, 1]] = 0.5;
        corr[[1, 0]] = 0.5;
        let double =
            ModelParams::new(vec![100.0, 100.0], 0.04, vec![0.2, 0.2], corr).unwrap();
        let cfg = LsmConfig::new(20_000, 10, poly(2), 11);
        let base = price_american_lsm(&spec, &single, &cfg).unwrap();
        let extra = price_american_lsm(&spec, &double, &cfg).unwrap();
        // The second asset only widens the regression state; the contract
        // is still a put on the first asset, so prices stay close.
        assert_eq!(extra.records[0].state.len(), 2);
        let tol = 4.0 * (base.result.std_error + extra.result.std_error);
        assert!(
            (base.result.price - extra.result.price).abs() < tol,
            "single {} vs two-asset {}",
            base.result.price,
            extra.result.price
        );
    }

    #[test]
    fn records_have_consistent_labels_and_flatten() {
        let spec = OptionSpec::american_put(100.0, 1.0).unwrap();
        let params = ModelParams::single_asset(100.0, 0.04, 0.2).unwrap();
        let cfg = LsmConfig::new(500, 8, poly(2), 19);
        let out = price_american_lsm(&spec, &params, &cfg).unwrap();
        assert!(!out.records.is_empty());
        for rec in &out.records {
            assert!(rec.payoff > 0.0);
            assert_eq!(rec.exercised, rec.payoff > rec.continuation);
            assert!(rec.step >= 1 && rec.step < 8);
        }
        let (features, labels) = exercise_dataset(&out.records).unwrap();
        assert_eq!(features.nrows(), out.records.len());
        assert_eq!(features.ncols(), 3);
        assert!(labels.iter().all(|&l| l == 0.0 || l == 1.0));
        assert!(exercise_dataset(&[]).is_err());
    }

    #[test]
    fn record_csv_layout() {
        let records = vec![ExerciseDecisionRecord {
            step: 3,
            time: 0.12,
            state: vec![95.5],
            payoff: 4.5,
            continuation: 4.0,
            exercised: true,
        }];
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,state_0,payoff,continuation,label\n3,95.5,4.5,4,1\n"
        );
    }
}
