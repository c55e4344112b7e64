//! LSTM and GRU cell parameters, single-step forward passes and the
//! per-step backward rules used by truncated BPTT.
//!
//! Gate conventions: all gate activations are logistic sigmoids, candidate
//! activations are tanh. The LSTM cell state update is
//! `c_t = f ⊙ c_prev + i ⊙ c̃` with hidden output `h_t = o ⊙ tanh(c_t)`.
//! The GRU uses `h_t = (1 − z) ⊙ h_prev + z ⊙ h̃` where the reset gate
//! scales the recurrent term inside the candidate,
//! `h̃ = tanh(W_hx x + r ⊙ (W_hh h_prev) + b_h)`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::regression::sigmoid;

use super::RecurrentError;

/// One affine gate: `W_x x + W_h h_prev + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl Gate {
    fn zeros(input: usize, hidden: usize) -> Self {
        Gate {
            w_x: Array2::zeros((hidden, input)),
            w_h: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut gate = Gate::zeros(input, hidden);
        let x_bound = 1.0 / (input as f64).sqrt();
        let h_bound = 1.0 / (hidden as f64).sqrt();
        for w in gate.w_x.iter_mut() {
            *w = rng.random_range(-x_bound..x_bound);
        }
        for w in gate.w_h.iter_mut() {
            *w = rng.random_range(-h_bound..h_bound);
        }
        gate
    }

    fn preactivation(&self, x: ArrayView1<f64>, h_prev: ArrayView1<f64>) -> Array1<f64> {
        self.w_x.dot(&x) + self.w_h.dot(&h_prev) + &self.b
    }
}

/// LSTM parameters: input, forget and output gates plus the candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    pub candidate: Gate,
}

/// GRU parameters: update and reset gates plus the candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub update_gate: Gate,
    pub reset_gate: Gate,
    pub candidate: Gate,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input_gate: Gate::zeros(input, hidden),
            forget_gate: Gate::zeros(input, hidden),
            output_gate: Gate::zeros(input, hidden),
            candidate: Gate::zeros(input, hidden),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        LstmParams {
            input_gate: Gate::init(input, hidden, rng),
            forget_gate: Gate::init(input, hidden, rng),
            output_gate: Gate::init(input, hidden, rng),
            candidate: Gate::init(input, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_gate.w_x.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_gate.w_x.nrows()
    }

    pub fn gates(&self) -> [&Gate; 4] {
        [&self.input_gate, &self.forget_gate, &self.output_gate, &self.candidate]
    }

    pub fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ]
    }
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            update_gate: Gate::zeros(input, hidden),
            reset_gate: Gate::zeros(input, hidden),
            candidate: Gate::zeros(input, hidden),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        GruParams {
            update_gate: Gate::init(input, hidden, rng),
            reset_gate: Gate::init(input, hidden, rng),
            candidate: Gate::init(input, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.update_gate.w_x.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.update_gate.w_x.nrows()
    }

    pub fn gates(&self) -> [&Gate; 3] {
        [&self.update_gate, &self.reset_gate, &self.candidate]
    }

    pub fn gates_mut(&mut self) -> [&mut Gate; 3] {
        [&mut self.update_gate, &mut self.reset_gate, &mut self.candidate]
    }
}

fn check_dims(
    input: usize,
    hidden: usize,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
) -> Result<(), RecurrentError> {
    if x.len() != input {
        return Err(RecurrentError::ShapeMismatch {
            what: "input vector",
            expected: input,
            got: x.len(),
        });
    }
    if h_prev.len() != hidden {
        return Err(RecurrentError::ShapeMismatch {
            what: "hidden state",
            expected: hidden,
            got: h_prev.len(),
        });
    }
    Ok(())
}

/// Everything the backward pass needs from one LSTM forward step.
#[derive(Debug, Clone)]
pub(crate) struct LstmStepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub o: Array1<f64>,
    pub c_tilde: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

/// Everything the backward pass needs from one GRU forward step.
#[derive(Debug, Clone)]
pub(crate) struct GruStepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    /// Recurrent candidate term `W_hh h_prev` before the reset gate.
    pub wh_h: Array1<f64>,
    pub h_tilde: Array1<f64>,
    pub h: Array1<f64>,
}

pub(crate) fn lstm_forward(
    params: &LstmParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> Result<LstmStepCache, RecurrentError> {
    check_dims(params.input_dim(), params.hidden_dim(), x, h_prev)?;
    if c_prev.len() != params.hidden_dim() {
        return Err(RecurrentError::ShapeMismatch {
            what: "cell state",
            expected: params.hidden_dim(),
            got: c_prev.len(),
        });
    }
    let i = params.input_gate.preactivation(x, h_prev).mapv(sigmoid);
    let f = params.forget_gate.preactivation(x, h_prev).mapv(sigmoid);
    let o = params.output_gate.preactivation(x, h_prev).mapv(sigmoid);
    let c_tilde = params.candidate.preactivation(x, h_prev).mapv(f64::tanh);
    let c = &f * &c_prev + &i * &c_tilde;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    Ok(LstmStepCache {
        x: x.to_owned(),
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        i,
        f,
        o,
        c_tilde,
        tanh_c,
        h,
        c,
    })
}

pub(crate) fn gru_forward(
    params: &GruParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
) -> Result<GruStepCache, RecurrentError> {
    check_dims(params.input_dim(), params.hidden_dim(), x, h_prev)?;
    let z = params.update_gate.preactivation(x, h_prev).mapv(sigmoid);
    let r = params.reset_gate.preactivation(x, h_prev).mapv(sigmoid);
    let wh_h = params.candidate.w_h.dot(&h_prev);
    let pre = params.candidate.w_x.dot(&x) + &r * &wh_h + &params.candidate.b;
    let h_tilde = pre.mapv(f64::tanh);
    let h = (1.0 - &z) * &h_prev + &z * &h_tilde;
    Ok(GruStepCache { x: x.to_owned(), h_prev: h_prev.to_owned(), z, r, wh_h, h_tilde, h })
}

/// Advances an LSTM cell one time step, returning `(h_t, c_t)`.
pub fn lstm_step(
    params: &LstmParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>), RecurrentError> {
    let cache = lstm_forward(params, x, h_prev, c_prev)?;
    Ok((cache.h, cache.c))
}

/// Advances a GRU cell one time step, returning `h_t`.
pub fn gru_step(
    params: &GruParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
) -> Result<Array1<f64>, RecurrentError> {
    Ok(gru_forward(params, x, h_prev)?.h)
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((col.len(), row.len()));
    for (i, &c) in col.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            out[[i, j]] = c * r;
        }
    }
    out
}

fn accumulate_gate(grad: &mut Gate, da: &Array1<f64>, cache_x: &Array1<f64>, h_prev: &Array1<f64>) {
    grad.w_x += &outer(da, cache_x);
    grad.w_h += &outer(da, h_prev);
    grad.b += da;
}

/// Backpropagates one LSTM step. `dh` and `dc` are the loss gradients with
/// respect to `h_t` and `c_t`; gradients accumulate into `grads` and the
/// returned triple is `(dx, dh_prev, dc_prev)`.
pub(crate) fn lstm_backward(
    params: &LstmParams,
    cache: &LstmStepCache,
    dh: &Array1<f64>,
    dc_in: &Array1<f64>,
    grads: &mut LstmParams,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let d_o = dh * &cache.tanh_c;
    let dc = dc_in + &(dh * &cache.o * cache.tanh_c.mapv(|t| 1.0 - t * t));
    let d_f = &dc * &cache.c_prev;
    let d_i = &dc * &cache.c_tilde;
    let d_c_tilde = &dc * &cache.i;
    let dc_prev = &dc * &cache.f;

    let da_i = d_i * &cache.i * cache.i.mapv(|v| 1.0 - v);
    let da_f = d_f * &cache.f * cache.f.mapv(|v| 1.0 - v);
    let da_o = d_o * &cache.o * cache.o.mapv(|v| 1.0 - v);
    let da_c = d_c_tilde * cache.c_tilde.mapv(|t| 1.0 - t * t);

    let mut dx = Array1::zeros(cache.x.len());
    let mut dh_prev = Array1::zeros(cache.h_prev.len());
    let pairs = [
        (&params.input_gate, &da_i, 0usize),
        (&params.forget_gate, &da_f, 1),
        (&params.output_gate, &da_o, 2),
        (&params.candidate, &da_c, 3),
    ];
    for (gate, da, which) in pairs {
        dx += &gate.w_x.t().dot(da);
        dh_prev += &gate.w_h.t().dot(da);
        let grad_gate = &mut grads.gates_mut()[which];
        accumulate_gate(grad_gate, da, &cache.x, &cache.h_prev);
    }
    (dx, dh_prev, dc_prev)
}

/// Backpropagates one GRU step; returns `(dx, dh_prev)`.
pub(crate) fn gru_backward(
    params: &GruParams,
    cache: &GruStepCache,
    dh: &Array1<f64>,
    grads: &mut GruParams,
) -> (Array1<f64>, Array1<f64>) {
    let d_z = dh * &(&cache.h_tilde - &cache.h_prev);
    let d_h_tilde = dh * &cache.z;
    let mut dh_prev = dh * &cache.z.mapv(|z| 1.0 - z);

    let da_h = d_h_tilde * cache.h_tilde.mapv(|t| 1.0 - t * t);
    let d_r = &da_h * &cache.wh_h;
    let d_wh_h = &da_h * &cache.r;

    grads.candidate.w_x += &outer(&da_h, &cache.x);
    grads.candidate.w_h += &outer(&d_wh_h, &cache.h_prev);
    grads.candidate.b += &da_h;
    dh_prev += &params.candidate.w_h.t().dot(&d_wh_h);

    let da_z = d_z * &cache.z * cache.z.mapv(|v| 1.0 - v);
    let da_r = d_r * &cache.r * cache.r.mapv(|v| 1.0 - v);
    accumulate_gate(&mut grads.update_gate, &da_z, &cache.x, &cache.h_prev);
    accumulate_gate(&mut grads.reset_gate, &da_r, &cache.x, &cache.h_prev);
    dh_prev += &params.update_gate.w_h.t().dot(&da_z);
    dh_prev += &params.reset_gate.w_h.t().dot(&da_r);

    let dx = params.candidate.w_x.t().dot(&da_h)
        + params.update_gate.w_x.t().dot(&da_z)
        + params.reset_gate.w_x.t().dot(&da_r);
    (dx, dh_prev)
}

/// Floating-point operation count of one LSTM step (multiply, add and
/// activation evaluations), used to compare cell costs deterministically.
pub fn lstm_step_flops(input: usize, hidden: usize) -> usize {
    // 4 gates: matvec mul+add on both inputs, bias add, activation.
    4 * (2 * hidden * (input + hidden) + 2 * hidden)
        // cell update f*c + i*c~ (3), tanh(c) (1), o*tanh (1) per unit
        + 5 * hidden
}

/// Floating-point operation count of one GRU step.
pub fn gru_step_flops(input: usize, hidden: usize) -> usize {
    // 3 gates as above, reset multiply, blend (1-z)*h + z*h~ (4 per unit).
    3 * (2 * hidden * (input + hidden) + 2 * hidden) + hidden + 4 * hidden
}
