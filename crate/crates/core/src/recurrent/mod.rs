//! Desk-scale recurrent networks: LSTM and GRU cells with exact gate
//! equations, manual backpropagation through time, and an Adam training
//! loop for sequence or tabular regression.
//!
//! The cells are deliberately small and transparent: every gate is an
//! explicit affine map plus activation, and gradients are derived by hand
//! and checked against finite differences in the test suite. This favors
//! auditability over throughput; the architecture still scales to the
//! multi-layer shapes used for quote-level price prediction.

mod cell;
mod network;

pub use cell::{
    Gate, GruParams, LstmParams, gru_step, gru_step_flops, lstm_step, lstm_step_flops,
};
pub use network::{
    Activation, AdamState, CellKind, EpochStats, Network, NetworkConfig, TrainOutput,
    loss_and_gradients, train, write_history_csv,
};

use thiserror::Error;

/// Errors from cell evaluation, training and model persistence.
#[derive(Debug, Error)]
pub enum RecurrentError {
    /// A vector or matrix had the wrong dimension.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    /// Too few rows to build the requested training set.
    #[error("insufficient data: {rows} rows, need at least {needed}")]
    InsufficientData { rows: usize, needed: usize },
    /// A configuration field failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Training produced a NaN or infinite loss.
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    /// Failure reading or writing a model or history file.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A saved model file did not match the expected layout.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Per-step forward cache, one variant per cell kind.
#[derive(Debug, Clone)]
pub(crate) enum StepCache {
    Lstm(cell::LstmStepCache),
    Gru(cell::GruStepCache),
}
