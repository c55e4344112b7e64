//! Subcommand implementations. Every command writes its primary artifact
//! under the output directory and echoes it to stdout; notices and
//! warnings go to stderr so redirected output stays machine-readable.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::Args;
use ndarray::{Array1, Array2};
use rayon::prelude::*;

use optmc::data::{self, QuoteTable, NUMERIC_COLUMNS};
use optmc::lsm::{
    price_american_binomial, price_american_lsm, price_european_mc, DecisionMode, LsmConfig,
    LsmOutcome, RegressionScope, UpdateRule,
};
use optmc::market::{ModelParams, OptionKind, OptionSpec};
use optmc::metrics::{self, ClassificationReport};
use optmc::paths::{cholesky, Scheme};
use optmc::recurrent::{self, NetworkConfig};
use optmc::regression::{
    BoostConfig, EstimatorSpec, ForestConfig, KnnConfig, LogisticConfig, PolynomialBasisConfig,
    TreeConfig,
};

use crate::table::{OutputFormat, RowTable};
use crate::{config, runtime, CliError, Common, DEFAULT_SEED};

const ESTIMATOR_NAMES: [&str; 6] = ["polynomial", "knn", "tree", "forest", "boost", "logistic"];

/// splitmix64 finalizer; decorrelates per-cell seeds so neighboring grid
/// cells do not share low bits of their RNG streams.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_seed(base: u64, index: usize) -> u64 {
    splitmix64(base ^ splitmix64(index as u64 + 1))
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse_scalar(key, v)).collect()
}

fn format_ms(elapsed: std::time::Duration) -> String {
    format!("{:.3}", elapsed.as_secs_f64() * 1e3)
}

/// Joins a name override onto the output directory (absolute overrides
/// win), or falls back to `stem` plus the format's extension.
fn resolve_out(
    common: &Common,
    name: &Option<PathBuf>,
    stem: &str,
    format: OutputFormat,
) -> PathBuf {
    match name {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => common.out_dir.join(p),
        None => common
            .out_dir
            .join(format!("{stem}.{}", format.extension())),
    }
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(path, content).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit(path: &Path, content: &str) -> Result<(), CliError> {
    write_output(path, content)?;
    print!("{content}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------
// sweep

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Optional key=value file applied before flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated spot prices.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub spots: Option<Vec<f64>>,
    /// Comma-separated volatilities.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub vols: Option<Vec<f64>>,
    /// Comma-separated maturities in years.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub maturities: Option<Vec<f64>>,
    /// Option kind: put or call.
    #[arg(long)]
    pub kind: Option<String>,
    /// Strike price shared by every grid cell.
    #[arg(long)]
    pub strike: Option<f64>,
    /// Risk-free rate (continuous compounding).
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    /// Monte Carlo paths per grid cell.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Exercise dates per contract.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Continuation estimator: polynomial, knn, tree, forest, boost or logistic.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Polynomial basis order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Neighbor count for knn.
    #[arg(long)]
    pub k: Option<usize>,
    /// Trees in the random forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Boosting rounds.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Tree depth cap; 0 keeps the estimator's default.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum samples per leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Boosting shrinkage per round.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Fraction of features per forest split, in (0, 1].
    #[arg(long)]
    pub feature_fraction: Option<f64>,
    /// Bootstrap sample fraction per tree; 0 trains on the full sample.
    #[arg(long)]
    pub bootstrap: Option<f64>,
    /// Value update after the exercise decision: realized_cashflow or
    /// continuation_value.
    #[arg(long)]
    pub update_rule: Option<String>,
    /// Regression fit scope: itm or all.
    #[arg(long)]
    pub scope: Option<String>,
    /// Exercise probability cutoff for the logistic classifier.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Number of correlated underlyings; payoff stays on the first.
    #[arg(long)]
    pub assets: Option<usize>,
    /// Equicorrelation between distinct assets.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Path scheme: exact_lognormal or arithmetic_euler.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Output file name (default sweep.csv or sweep.txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved sweep settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
struct SweepConfig {
    spots: Vec<f64>,
    vols: Vec<f64>,
    maturities: Vec<f64>,
    kind: OptionKind,
    strike: f64,
    rate: f64,
    n_paths: usize,
    n_steps: usize,
    estimator: String,
    order: usize,
    k: usize,
    trees: usize,
    rounds: usize,
    max_depth: usize,
    min_leaf: usize,
    learning_rate: f64,
    feature_fraction: f64,
    bootstrap: f64,
    update_rule: UpdateRule,
    scope: RegressionScope,
    threshold: f64,
    assets: usize,
    rho: f64,
    scheme: Scheme,
    seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            spots: (0..9).map(|i| 80.0 + 5.0 * i as f64).collect(),
            vols: vec![0.2, 0.4],
            maturities: vec![1.0, 2.0],
            kind: OptionKind::Put,
            strike: 100.0,
            rate: 0.04,
            n_paths: 10_000,
            n_steps: 25,
            estimator: "polynomial".to_string(),
            order: 2,
            k: 10,
            trees: 100,
            rounds: 100,
            max_depth: 0,
            min_leaf: 1,
            learning_rate: 0.1,
            feature_fraction: 1.0,
            bootstrap: 1.0,
            update_rule: UpdateRule::RealizedCashflow,
            scope: RegressionScope::InTheMoneyOnly,
            threshold: 0.5,
            assets: 1,
            rho: 0.0,
            scheme: Scheme::ExactLognormal,
            seed: DEFAULT_SEED,
        }
    }
}

impl SweepConfig {
    /// Applies one `key=value` pair from a config file. Keys use the same
    /// spelling as the long flags.
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "spots" => self.spots = parse_f64_list(key, value)?,
            "vols" => self.vols = parse_f64_list(key, value)?,
            "maturities" => self.maturities = parse_f64_list(key, value)?,
            "kind" => self.kind = named_parse(key, value)?,
            "strike" => self.strike = parse_scalar(key, value)?,
            "rate" => self.rate = parse_scalar(key, value)?,
            "paths" => self.n_paths = parse_scalar(key, value)?,
            "steps" => self.n_steps = parse_scalar(key, value)?,
            "estimator" => self.estimator = value.trim().to_string(),
            "order" => self.order = parse_scalar(key, value)?,
            "k" => self.k = parse_scalar(key, value)?,
            "trees" => self.trees = parse_scalar(key, value)?,
            "rounds" => self.rounds = parse_scalar(key, value)?,
            "max-depth" => self.max_depth = parse_scalar(key, value)?,
            "min-leaf" => self.min_leaf = parse_scalar(key, value)?,
            "learning-rate" => self.learning_rate = parse_scalar(key, value)?,
            "feature-fraction" => self.feature_fraction = parse_scalar(key, value)?,
            "bootstrap" => self.bootstrap = parse_scalar(key, value)?,
            "update-rule" => self.update_rule = named_parse(key, value)?,
            "scope" => self.scope = named_parse(key, value)?,
            "threshold" => self.threshold = parse_scalar(key, value)?,
            "assets" => self.assets = parse_scalar(key, value)?,
            "rho" => self.rho = parse_scalar(key, value)?,
            "scheme" => self.scheme = named_parse(key, value)?,
            "seed" => self.seed = parse_scalar(key, value)?,
            other => return Err(config(format!("{other}: unknown configuration key"))),
        }
        Ok(())
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config(format!(
                    "{}:{}: expected key=value, got '{raw}'",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    fn apply_flags(&mut self, a: &SweepArgs) -> Result<(), CliError> {
        if let Some(v) = &a.spots {
            self.spots = v.clone();
        }
        if let Some(v) = &a.vols {
            self.vols = v.clone();
        }
        if let Some(v) = &a.maturities {
            self.maturities = v.clone();
        }
        if let Some(v) = &a.kind {
            self.kind = named_parse("kind", v)?;
        }
        if let Some(v) = a.strike {
            self.strike = v;
        }
        if let Some(v) = a.rate {
            self.rate = v;
        }
        if let Some(v) = a.paths {
            self.n_paths = v;
        }
        if let Some(v) = a.steps {
            self.n_steps = v;
        }
        if let Some(v) = &a.estimator {
            self.estimator = v.clone();
        }
        if let Some(v) = a.order {
            self.order = v;
        }
        if let Some(v) = a.k {
            self.k = v;
        }
        if let Some(v) = a.trees {
            self.trees = v;
        }
        if let Some(v) = a.rounds {
            self.rounds = v;
        }
        if let Some(v) = a.max_depth {
            self.max_depth = v;
        }
        if let Some(v) = a.min_leaf {
            self.min_leaf = v;
        }
        if let Some(v) = a.learning_rate {
            self.learning_rate = v;
        }
        if let Some(v) = a.feature_fraction {
            self.feature_fraction = v;
        }
        if let Some(v) = a.bootstrap {
            self.bootstrap = v;
        }
        if let Some(v) = &a.update_rule {
            self.update_rule = named_parse("update-rule", v)?;
        }
        if let Some(v) = &a.scope {
            self.scope = named_parse("scope", v)?;
        }
        if let Some(v) = a.threshold {
            self.threshold = v;
        }
        if let Some(v) = a.assets {
            self.assets = v;
        }
        if let Some(v) = a.rho {
            self.rho = v;
        }
        if let Some(v) = &a.scheme {
            self.scheme = named_parse("scheme", v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        require("spots", !self.spots.is_empty(), "needs at least one value")?;
        for &s in &self.spots {
            require("spots", s.is_finite() && s > 0.0, &format!("{s} is not a positive price"))?;
        }
        require("vols", !self.vols.is_empty(), "needs at least one value")?;
        for &v in &self.vols {
            require("vols", v.is_finite() && v >= 0.0, &format!("{v} is not a valid volatility"))?;
        }
        require("maturities", !self.maturities.is_empty(), "needs at least one value")?;
        for &t in &self.maturities {
            require(
                "maturities",
                t.is_finite() && t > 0.0,
                &format!("{t} is not a positive maturity"),
            )?;
        }
        require("strike", self.strike.is_finite() && self.strike > 0.0, "must be positive")?;
        require("rate", self.rate.is_finite(), "must be finite")?;
        require("paths", self.n_paths >= 2, "needs at least 2 paths")?;
        require("steps", self.n_steps >= 1, "needs at least 1 step")?;
        require(
            "estimator",
            ESTIMATOR_NAMES.contains(&self.estimator.as_str()),
            &format!("unknown estimator '{}' (expected one of {})", self.estimator, ESTIMATOR_NAMES.join(", ")),
        )?;
        require("k", self.k >= 1, "needs at least one neighbor")?;
        require("trees", self.trees >= 1, "needs at least one tree")?;
        require("min-leaf", self.min_leaf >= 1, "must be at least 1")?;
        require(
            "learning-rate",
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            "must be positive",
        )?;
        require(
            "feature-fraction",
            self.feature_fraction > 0.0 && self.feature_fraction <= 1.0,
            "must lie in (0, 1]",
        )?;
        require(
            "bootstrap",
            self.bootstrap.is_finite() && self.bootstrap >= 0.0,
            "must be non-negative (0 disables resampling)",
        )?;
        require(
            "threshold",
            self.threshold > 0.0 && self.threshold < 1.0,
            "must lie strictly between 0 and 1",
        )?;
        require("assets", self.assets >= 1, "needs at least one underlying")?;
        require("rho", (-1.0..=1.0).contains(&self.rho), "must lie in [-1, 1]")?;
        if self.assets > 1 {
            let corr = equicorrelation(self.assets, self.rho);
            if cholesky(corr.view()).is_err() {
                return Err(config(format!(
                    "rho: equicorrelation {} across {} assets is not positive definite",
                    self.rho, self.assets
                )));
            }
        }
        if self.estimator == "logistic" && self.update_rule == UpdateRule::ContinuationValue {
            return Err(config(
                "update-rule: continuation_value does not apply to the logistic \
                 classifier (it fits exercise labels, not continuation values)",
            ));
        }
        Ok(())
    }

    fn build_estimator(&self) -> EstimatorSpec {
        let depth_or = |fallback: Option<usize>| {
            if self.max_depth > 0 {
                Some(self.max_depth)
            } else {
                fallback
            }
        };
        let tree = TreeConfig {
            max_depth: depth_or(None),
            min_samples_leaf: self.min_leaf,
        };
        match self.estimator.as_str() {
            "polynomial" => EstimatorSpec::Polynomial(PolynomialBasisConfig::new(self.order)),
            "knn" => EstimatorSpec::Knn(KnnConfig { k: self.k }),
            "tree" => EstimatorSpec::Tree(tree),
            "forest" => EstimatorSpec::Forest(ForestConfig {
                n_trees: self.trees,
                bootstrap: (self.bootstrap > 0.0).then_some(self.bootstrap),
                feature_fraction: self.feature_fraction,
                seed: 0,
                tree,
            }),
            "boost" => EstimatorSpec::Boost(BoostConfig {
                n_rounds: self.rounds,
                learning_rate: self.learning_rate,
                tree: TreeConfig {
                    max_depth: depth_or(Some(3)),
                    min_samples_leaf: self.min_leaf,
                },
            }),
            "logistic" => EstimatorSpec::Logistic(LogisticConfig::default()),
            other => unreachable!("estimator '{other}' passed validation"),
        }
    }

    fn decision_mode(&self) -> DecisionMode {
        if self.estimator == "logistic" {
            DecisionMode::Classifier {
                threshold: self.threshold,
            }
        } else {
            DecisionMode::Regression
        }
    }

    fn spec_for(&self, maturity: f64) -> Result<OptionSpec, CliError> {
        Ok(match self.kind {
            OptionKind::Put => OptionSpec::american_put(self.strike, maturity)?,
            OptionKind::Call => OptionSpec::american_call(self.strike, maturity)?,
        })
    }

    fn model_for(&self, spot: f64, vol: f64) -> Result<ModelParams, CliError> {
        let params = if self.assets == 1 {
            ModelParams::single_asset(spot, self.rate, vol)
        } else {
            ModelParams::new(
                vec![spot; self.assets],
                self.rate,
                vec![vol; self.assets],
                equicorrelation(self.assets, self.rho),
            )
        };
        Ok(params?)
    }
}

fn named_parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| config(format!("{key}: {e}")))
}

fn require(key: &str, ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(config(format!("{key}: {msg}")))
    }
}

fn equicorrelation(n: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { rho })
}

struct SweepRow {
    spot: f64,
    vol: f64,
    maturity: f64,
    outcome: LsmOutcome,
}

pub fn run_sweep(args: &SweepArgs, common: &Common) -> Result<(), CliError> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_flags(args)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    let estimator = cfg.build_estimator();
    let mode = cfg.decision_mode();
    let mut cells = Vec::new();
    for &spot in &cfg.spots {
        for &vol in &cfg.vols {
            for &maturity in &cfg.maturities {
                cells.push((cells.len(), spot, vol, maturity));
            }
        }
    }

    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(index, spot, vol, maturity)| {
            let spec = cfg.spec_for(maturity)?;
            let params = cfg.model_for(spot, vol)?;
            let mut lsm = LsmConfig::new(
                cfg.n_paths,
                cfg.n_steps,
                estimator.clone(),
                cell_seed(cfg.seed, index),
            );
            lsm.update_rule = cfg.update_rule;
            lsm.regression_scope = cfg.scope;
            lsm.decision_mode = mode;
            lsm.scheme = cfg.scheme;
            let outcome = price_american_lsm(&spec, &params, &lsm)?;
            Ok(SweepRow {
                spot,
                vol,
                maturity,
                outcome,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let degraded: usize = rows.iter().map(|r| r.outcome.degraded_steps).sum();
    if degraded > 0 {
        eprintln!("warning: {degraded} regression step(s) degraded to never-exercise");
    }

    let mut columns = vec!["spot", "vol", "maturity", "estimator", "price", "std_error"];
    if common.emit_timing {
        columns.push("elapsed_ms");
    }
    let mut table = RowTable::new(columns);
    for row in &rows {
        let mut cells = vec![
            row.spot.to_string(),
            row.vol.to_string(),
            row.maturity.to_string(),
            row.outcome.estimator.clone(),
            row.outcome.result.price.to_string(),
            row.outcome.result.std_error.to_string(),
        ];
        if common.emit_timing {
            cells.push(format_ms(row.outcome.result.elapsed));
        }
        table.push_row(cells);
    }

    let path = resolve_out(common, &args.out, "sweep", common.format);
    emit(&path, &table.render(common.format))
}

// ---------------------------------------------------------------------
// compare

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Underlying spot price.
    #[arg(long)]
    pub spot: Option<f64>,
    /// Strike price.
    #[arg(long)]
    pub strike: Option<f64>,
    /// Maturity in years.
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Risk-free rate (continuous compounding).
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    /// Volatility.
    #[arg(long)]
    pub vol: Option<f64>,
    /// Monte Carlo paths per method.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Exercise dates for the LSM methods.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Binomial lattice steps for the reference row.
    #[arg(long)]
    pub lattice_steps: Option<usize>,
    /// Output file name (default compare.csv or compare.txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_compare(args: &CompareArgs, common: &Common) -> Result<(), CliError> {
    let spot = args.spot.unwrap_or(100.0);
    let strike = args.strike.unwrap_or(100.0);
    let maturity = args.maturity.unwrap_or(1.0);
    let rate = args.rate.unwrap_or(0.02);
    let vol = args.vol.unwrap_or(0.4);
    let n_paths = args.paths.unwrap_or(10_000);
    let n_steps = args.steps.unwrap_or(25);
    let lattice_steps = args.lattice_steps.unwrap_or(2_000);
    let seed = common.seed.unwrap_or(DEFAULT_SEED);

    require("spot", spot.is_finite() && spot > 0.0, "must be positive")?;
    require("strike", strike.is_finite() && strike > 0.0, "must be positive")?;
    require("maturity", maturity.is_finite() && maturity > 0.0, "must be positive")?;
    require("rate", rate.is_finite(), "must be finite")?;
    require("vol", vol.is_finite() && vol >= 0.0, "must be non-negative")?;
    require("paths", n_paths >= 2, "needs at least 2 paths")?;
    require("steps", n_steps >= 1, "needs at least 1 step")?;
    require("lattice-steps", lattice_steps >= 1, "needs at least 1 step")?;

    let american = OptionSpec::american_put(strike, maturity)?;
    let european = OptionSpec::european_put(strike, maturity)?;
    let params = ModelParams::single_asset(spot, rate, vol)?;

    let roster: [(&str, EstimatorSpec, DecisionMode); 6] = [
        (
            "polynomial",
            EstimatorSpec::Polynomial(PolynomialBasisConfig::new(2)),
            DecisionMode::Regression,
        ),
        (
            "knn",
            EstimatorSpec::Knn(KnnConfig { k: 10 }),
            DecisionMode::Regression,
        ),
        (
            "tree",
            EstimatorSpec::Tree(TreeConfig::default()),
            DecisionMode::Regression,
        ),
        (
            "forest",
            EstimatorSpec::Forest(ForestConfig::default()),
            DecisionMode::Regression,
        ),
        (
            "boost",
            EstimatorSpec::Boost(BoostConfig::default()),
            DecisionMode::Regression,
        ),
        (
            "logistic",
            EstimatorSpec::Logistic(LogisticConfig::default()),
            DecisionMode::Classifier { threshold: 0.5 },
        ),
    ];

    struct CompareRow {
        method: &'static str,
        price: f64,
        std_error: Option<f64>,
        elapsed: std::time::Duration,
    }

    let mut rows = Vec::new();
    for (name, estimator, mode) in roster {
        let mut lsm = LsmConfig::new(n_paths, n_steps, estimator, seed);
        lsm.decision_mode = mode;
        let outcome = price_american_lsm(&american, &params, &lsm)?;
        rows.push(CompareRow {
            method: name,
            price: outcome.result.price,
            std_error: Some(outcome.result.std_error),
            elapsed: outcome.result.elapsed,
        });
    }

    let start = Instant::now();
    let lattice = price_american_binomial(&american, spot, rate, vol, lattice_steps)?;
    rows.push(CompareRow {
        method: "binomial",
        price: lattice,
        std_error: None,
        elapsed: start.elapsed(),
    });

    let reference = price_european_mc(&european, &params, n_paths, seed)?;
    rows.push(CompareRow {
        method: "european_mc",
        price: reference.price,
        std_error: Some(reference.std_error),
        elapsed: reference.elapsed,
    });

    let mut columns = vec!["method", "price", "std_error"];
    if common.emit_timing {
        columns.push("elapsed_ms");
    }
    let mut table = RowTable::new(columns);
    for row in &rows {
        let mut cells = vec![
            row.method.to_string(),
            row.price.to_string(),
            row.std_error.map_or_else(|| "NA".to_string(), |s| s.to_string()),
        ];
        if common.emit_timing {
            cells.push(format_ms(row.elapsed));
        }
        table.push_row(cells);
    }

    let path = resolve_out(common, &args.out, "compare", common.format);
    emit(&path, &table.render(common.format))
}

// ---------------------------------------------------------------------
// metrics

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// CSV with one header row; needs a score and a label column.
    pub data: PathBuf,
    /// Column holding probability scores in [0, 1].
    #[arg(long, default_value = "score")]
    pub scores: String,
    /// Column holding binary labels (0 or 1).
    #[arg(long, default_value = "label")]
    pub labels: String,
    /// Classification cutoff: predicted positive when score > threshold.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Report file name (default metrics_report.csv or .txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Pulls named numeric columns out of a headed CSV file. `wanted` pairs a
/// column name with the flag key used in error messages.
fn read_numeric_columns(
    path: &Path,
    wanted: &[(&str, &str)],
) -> Result<Vec<Vec<f64>>, CliError> {
    let file = File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| config(format!("{}: {e}", path.display())))?
        .clone();
    let indices: Vec<usize> = wanted
        .iter()
        .map(|(name, key)| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                config(format!(
                    "{key}: column '{name}' not found in {}",
                    path.display()
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); wanted.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config(format!("{}: {e}", path.display())))?;
        for (slot, (&col, (name, key))) in indices.iter().zip(wanted).enumerate() {
            let raw = record.get(col).unwrap_or_default();
            let value: f64 = raw.trim().parse().map_err(|_| {
                config(format!(
                    "{key}: row {}, column '{name}': '{raw}' is not numeric",
                    row_no + 1
                ))
            })?;
            out[slot].push(value);
        }
    }
    Ok(out)
}

pub fn run_metrics(args: &MetricsArgs, common: &Common) -> Result<(), CliError> {
    require(
        "threshold",
        (0.0..=1.0).contains(&args.threshold),
        "must lie in [0, 1]",
    )?;
    let mut cols = read_numeric_columns(
        &args.data,
        &[(args.labels.as_str(), "labels"), (args.scores.as_str(), "scores")],
    )?;
    let scores = cols.pop().expect("two columns requested");
    let labels = cols.pop().expect("two columns requested");
    if labels.is_empty() {
        return Err(config(format!(
            "labels: {} holds no data rows",
            args.data.display()
        )));
    }

    let report = metrics::classification_report(&labels, &scores, args.threshold)?;
    let rendered = match common.format {
        OutputFormat::Csv => format!(
            "{}\n{}\n",
            ClassificationReport::csv_header(),
            report.to_csv_row()
        ),
        OutputFormat::Table => report.to_table(),
    };
    let path = resolve_out(common, &args.out, "metrics_report", common.format);
    emit(&path, &rendered)?;

    // Curve exports stay CSV regardless of --format; they exist to be
    // plotted, not read.
    match metrics::roc_curve(&labels, &scores) {
        Ok(points) => {
            let mut buf = Vec::new();
            metrics::write_curve_csv(&points, ("fpr", "tpr"), &mut buf)?;
            let roc_path = common.out_dir.join("roc_curve.csv");
            write_output(&roc_path, &String::from_utf8_lossy(&buf))?;
            eprintln!("wrote {}", roc_path.display());
        }
        Err(_) => eprintln!("warning: roc curve skipped (needs both classes present)"),
    }
    match metrics::pr_curve(&labels, &scores) {
        Ok(points) => {
            let mut buf = Vec::new();
            metrics::write_curve_csv(&points, ("recall", "precision"), &mut buf)?;
            let pr_path = common.out_dir.join("pr_curve.csv");
            write_output(&pr_path, &String::from_utf8_lossy(&buf))?;
            eprintln!("wrote {}", pr_path.display());
        }
        Err(_) => eprintln!("warning: pr curve skipped (needs a positive example)"),
    }
    Ok(())
}

// ---------------------------------------------------------------------
// correlate

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    /// Options-chain CSV in the canonical quote schema.
    pub quotes: PathBuf,
    /// Numeric columns to include (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Output file name (default correlation.csv or .txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_quotes(path: &Path) -> Result<QuoteTable, CliError> {
    let file = File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let table = data::parse_quotes(BufReader::new(file))?;
    if !table.diagnostics.is_empty() {
        eprintln!(
            "warning: skipped {} malformed row(s) in {}",
            table.diagnostics.len(),
            path.display()
        );
        for diag in &table.diagnostics {
            eprintln!("  {diag}");
        }
    }
    Ok(table)
}

pub fn run_correlate(args: &CorrelateArgs, common: &Common) -> Result<(), CliError> {
    let table = load_quotes(&args.quotes)?;
    let owned: Vec<String> = args.columns.clone().unwrap_or_default();
    let selected: Vec<&str> = owned.iter().map(String::as_str).collect();
    let matrix = data::correlation_matrix(&table, &selected)?;

    let mut header = vec!["column".to_string()];
    header.extend(matrix.columns.iter().cloned());
    let mut out = RowTable::new(header);
    for (i, name) in matrix.columns.iter().enumerate() {
        let mut cells = vec![name.clone()];
        for j in 0..matrix.columns.len() {
            cells.push(match matrix.values[[i, j]] {
                Some(v) => v.to_string(),
                None => "NA".to_string(),
            });
        }
        out.push_row(cells);
    }
    if matrix.has_undefined() {
        eprintln!(
            "warning: NA entries mark constant columns or fewer than two complete rows"
        );
    }

    let path = resolve_out(common, &args.out, "correlation", common.format);
    emit(&path, &out.render(common.format))
}

// ---------------------------------------------------------------------
// train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Options-chain CSV in the canonical quote schema.
    pub quotes: PathBuf,
    /// Numeric column to predict.
    #[arg(long, default_value = "bid")]
    pub target: String,
    /// Feature columns (default: every numeric column except the target).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Recurrent cell: gru or lstm.
    #[arg(long, default_value = "gru")]
    pub cell: String,
    /// Hidden widths, bottom layer first.
    #[arg(long, value_delimiter = ',', default_values_t = vec![8usize])]
    pub hidden: Vec<usize>,
    /// Dense head width.
    #[arg(long, default_value_t = 8)]
    pub dense: usize,
    /// Dense head activation: relu or tanh.
    #[arg(long, default_value = "relu")]
    pub activation: String,
    /// Consecutive rows per training sequence.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Metrics file name (default train_metrics.csv or .txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_train(args: &TrainArgs, common: &Common) -> Result<(), CliError> {
    require(
        "target",
        NUMERIC_COLUMNS.contains(&args.target.as_str()),
        &format!(
            "'{}' is not a numeric quote column (expected one of {})",
            args.target,
            NUMERIC_COLUMNS.join(", ")
        ),
    )?;
    let feature_names: Vec<String> = match &args.features {
        Some(list) => list.clone(),
        None => NUMERIC_COLUMNS
            .iter()
            .filter(|&&c| c != args.target)
            .map(|&c| c.to_string())
            .collect(),
    };
    require("features", !feature_names.is_empty(), "needs at least one column")?;
    for name in &feature_names {
        require(
            "features",
            NUMERIC_COLUMNS.contains(&name.as_str()),
            &format!("'{name}' is not a numeric quote column"),
        )?;
        require(
            "features",
            name != &args.target,
            &format!("target column '{name}' cannot be a feature"),
        )?;
    }

    let table = load_quotes(&args.quotes)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut dropped = 0usize;
    for record in &table.records {
        let mut cells = Vec::with_capacity(feature_names.len());
        let mut complete = true;
        for name in &feature_names {
            match record.numeric_value(name)? {
                Some(v) => cells.push(v),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        let target = record.numeric_value(&args.target)?;
        match (complete, target) {
            (true, Some(y)) => {
                rows.push(cells);
                targets.push(y);
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} row(s) with missing values");
    }

    let n = rows.len();
    let d = feature_names.len();
    let mut features = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    let targets = Array1::from_vec(targets);

    let net_config = NetworkConfig {
        cell: named_parse("cell", &args.cell)?,
        hidden: args.hidden.clone(),
        dense: args.dense,
        activation: named_parse("activation", &args.activation)?,
        window: args.window,
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: common.seed.unwrap_or(DEFAULT_SEED),
    };
    let trained = recurrent::train(&net_config, features.view(), targets.view())?;

    let cell_name = net_config.cell.to_string();
    let mut history = Vec::new();
    recurrent::write_history_csv(&trained.history, &mut history)?;
    let history_path = common.out_dir.join(format!("history_{cell_name}.csv"));
    write_output(&history_path, &String::from_utf8_lossy(&history))?;
    eprintln!("wrote {}", history_path.display());

    let mut model = Vec::new();
    trained.model.save(&mut model)?;
    let model_path = common.out_dir.join(format!("model_{cell_name}.txt"));
    write_output(&model_path, &String::from_utf8_lossy(&model))?;
    eprintln!("wrote {}", model_path.display());

    // Sequence s covers rows s .. s+window and predicts row s+window-1.
    let predictions = trained.model.predict(features.view())?;
    let window = net_config.window;
    let val_truth: Vec<f64> = trained
        .val_indices
        .iter()
        .map(|&s| targets[s + window - 1])
        .collect();
    let val_pred: Vec<f64> = trained.val_indices.iter().map(|&s| predictions[s]).collect();
    let errors = metrics::regression_errors(&val_truth, &val_pred)?;

    let mut table_out = RowTable::new([
        "cell",
        "target",
        "epochs",
        "n_train",
        "n_val",
        "val_mae",
        "val_mse",
        "val_rmse",
    ]);
    table_out.push_row(vec![
        cell_name,
        args.target.clone(),
        args.epochs.to_string(),
        trained.train_indices.len().to_string(),
        trained.val_indices.len().to_string(),
        errors.mae.to_string(),
        errors.mse.to_string(),
        errors.rmse.to_string(),
    ]);

    let path = resolve_out(common, &args.out, "train_metrics", common.format);
    emit(&path, &table_out.render(common.format))
}
