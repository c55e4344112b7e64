//! Monte Carlo option pricing with least-squares and machine-learning
//! continuation-value estimators.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`market`]: contract and model-parameter types, payoffs, discounting,
//!   and the Black-Scholes closed form used as a verification oracle.
//! - [`paths`]: correlated geometric Brownian motion simulation with
//!   deterministic per-path random substreams.
//! - [`regression`]: pluggable continuation-value estimators (polynomial
//!   least squares, k-nearest-neighbour, decision trees, random forests,
//!   gradient boosting) and a logistic exercise classifier.
//! - [`lsm`]: European Monte Carlo pricing, the least-squares Monte Carlo
//!   backward induction for American options, and a binomial-lattice oracle.
//! - [`metrics`]: regression and classification diagnostics for evaluating
//!   exercise-decision quality.
//! - [`recurrent`]: LSTM and GRU cells with manual backpropagation through
//!   time, sized for desk-scale sequence experiments.
//! - [`data`]: options-chain CSV ingestion, validation and summary
//!   statistics.

pub mod data;
pub mod lsm;
pub mod market;
pub mod metrics;
pub mod paths;
pub mod recurrent;
pub mod regression;
