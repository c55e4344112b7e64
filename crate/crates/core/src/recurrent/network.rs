//! Stacked recurrent network with a dense head, trained by mini-batch
//! Adam on mean-squared error.
//!
//! Tabular feature rows are consumed as length-`window` sequences of
//! consecutive rows (window 1, the default, treats each row as its own
//! sequence). Gradients come from full backpropagation through time over
//! the window. Training is single-threaded and bitwise deterministic for
//! a given seed; a trained network is immutable and safe to share across
//! threads for prediction.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::{
    Gate, GruParams, LstmParams, gru_backward, gru_forward, lstm_backward, lstm_forward,
};
use super::{RecurrentError, StepCache};

/// Which recurrent cell the hidden layers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellKind {
    Lstm,
    #[default]
    Gru,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

impl FromStr for CellKind {
    type Err = RecurrentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(RecurrentError::InvalidConfig(format!("unknown cell kind '{other}'"))),
        }
    }
}

/// Activation applied to the dense head (cell internals are fixed by the
/// gate equations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(pre > 0.0)),
            Activation::Tanh => 1.0 - post * post,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = RecurrentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(RecurrentError::InvalidConfig(format!("unknown activation '{other}'"))),
        }
    }
}

/// Architecture and training hyperparameters. The loss is always MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub cell: CellKind,
    /// Hidden width of each recurrent layer, bottom to top.
    pub hidden: Vec<usize>,
    /// Width of the dense layer between the last cell and the scalar output.
    pub dense: usize,
    pub activation: Activation,
    /// Consecutive rows per training sequence; 1 treats rows independently.
    pub window: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            cell: CellKind::default(),
            hidden: vec![8],
            dense: 8,
            activation: Activation::default(),
            window: 1,
            epochs: 200,
            batch_size: 64,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), RecurrentError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(RecurrentError::InvalidConfig(
                "hidden layer sizes must be non-empty and positive".into(),
            ));
        }
        if self.dense == 0 || self.window == 0 || self.batch_size == 0 {
            return Err(RecurrentError::InvalidConfig(
                "dense width, window and batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(RecurrentError::InvalidConfig(
                "learning rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), RecurrentError> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(RecurrentError::ShapeMismatch {
                what: "parameter vector",
                expected: self.first_moment.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.first_moment[k] = self.beta1 * self.first_moment[k] + (1.0 - self.beta1) * g;
            self.second_moment[k] =
                self.beta2 * self.second_moment[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[k] / bc1;
            let v_hat = self.second_moment[k] / bc2;
            params[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CellLayer {
    Lstm(LstmParams),
    Gru(GruParams),
}

impl CellLayer {
    fn init(kind: CellKind, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            CellKind::Lstm => CellLayer::Lstm(LstmParams::init(input, hidden, rng)),
            CellKind::Gru => CellLayer::Gru(GruParams::init(input, hidden, rng)),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            CellLayer::Lstm(p) => CellLayer::Lstm(LstmParams::zeros(p.input_dim(), p.hidden_dim())),
            CellLayer::Gru(p) => CellLayer::Gru(GruParams::zeros(p.input_dim(), p.hidden_dim())),
        }
    }

    fn hidden_dim(&self) -> usize {
        match self {
            CellLayer::Lstm(p) => p.hidden_dim(),
            CellLayer::Gru(p) => p.hidden_dim(),
        }
    }

    fn gates(&self) -> Vec<&Gate> {
        match self {
            CellLayer::Lstm(p) => p.gates().to_vec(),
            CellLayer::Gru(p) => p.gates().to_vec(),
        }
    }

    fn gates_mut(&mut self) -> Vec<&mut Gate> {
        match self {
            CellLayer::Lstm(p) => p.gates_mut().into_iter().collect(),
            CellLayer::Gru(p) => p.gates_mut().into_iter().collect(),
        }
    }
}

/// Recurrent layers, a dense layer with activation, and a scalar linear
/// output. Construct via [`Network::new`] or [`train`].
#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    input_dim: usize,
    cells: Vec<CellLayer>,
    dense_w: Array2<f64>,
    dense_b: Array1<f64>,
    out_w: Array1<f64>,
    out_b: f64,
}

struct HeadTrace {
    h_top: Array1<f64>,
    pre: Array1<f64>,
    act: Array1<f64>,
    pred: f64,
}

struct Trace {
    caches: Vec<Vec<StepCache>>,
    head: HeadTrace,
}

struct Grads {
    cells: Vec<CellLayer>,
    dense_w: Array2<f64>,
    dense_b: Array1<f64>,
    out_w: Array1<f64>,
    out_b: f64,
}

fn flatten_parts(
    cells: &[CellLayer],
    dense_w: &Array2<f64>,
    dense_b: &Array1<f64>,
    out_w: &Array1<f64>,
    out_b: f64,
    out: &mut Vec<f64>,
) {
    for cell in cells {
        for gate in cell.gates() {
            out.extend(gate.w_x.iter());
            out.extend(gate.w_h.iter());
            out.extend(gate.b.iter());
        }
    }
    out.extend(dense_w.iter());
    out.extend(dense_b.iter());
    out.extend(out_w.iter());
    out.push(out_b);
}

impl Network {
    /// Builds a network with seeded uniform `±1/sqrt(fan_in)` weights and
    /// zero biases.
    pub fn new(config: &NetworkConfig, input_dim: usize) -> Result<Network, RecurrentError> {
        config.validate()?;
        if input_dim == 0 {
            return Err(RecurrentError::InvalidConfig("input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut cells = Vec::with_capacity(config.hidden.len());
        let mut fan_in = input_dim;
        for &width in &config.hidden {
            cells.push(CellLayer::init(config.cell, fan_in, width, &mut rng));
            fan_in = width;
        }
        let dense_bound = 1.0 / (fan_in as f64).sqrt();
        let dense_w =
            Array2::from_shape_fn((config.dense, fan_in), |_| rng.random_range(-dense_bound..dense_bound));
        let out_bound = 1.0 / (config.dense as f64).sqrt();
        let out_w = Array1::from_shape_fn(config.dense, |_| rng.random_range(-out_bound..out_bound));
        Ok(Network {
            config: config.clone(),
            input_dim,
            cells,
            dense_w,
            dense_b: Array1::zeros(config.dense),
            out_w,
            out_b: 0.0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Total number of trainable parameters.
    pub fn n_params(&self) -> usize {
        self.flatten().len()
    }

    /// All parameters as one vector in a fixed documented order: per layer,
    /// per gate, `W_x` row-major, `W_h` row-major, bias; then the dense
    /// layer, output weights and output bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        flatten_parts(&self.cells, &self.dense_w, &self.dense_b, &self.out_w, self.out_b, &mut out);
        out
    }

    /// Writes a flat vector produced by [`Network::flatten`] back into the
    /// structured parameters.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<(), RecurrentError> {
        let expected = self.n_params();
        if flat.len() != expected {
            return Err(RecurrentError::ShapeMismatch {
                what: "flat parameter vector",
                expected,
                got: flat.len(),
            });
        }
        let mut k = 0;
        let mut take = |dst: &mut f64| {
            *dst = flat[k];
            k += 1;
        };
        for cell in &mut self.cells {
            for gate in cell.gates_mut() {
                gate.w_x.iter_mut().for_each(&mut take);
                gate.w_h.iter_mut().for_each(&mut take);
                gate.b.iter_mut().for_each(&mut take);
            }
        }
        self.dense_w.iter_mut().for_each(&mut take);
        self.dense_b.iter_mut().for_each(&mut take);
        self.out_w.iter_mut().for_each(&mut take);
        take(&mut self.out_b);
        Ok(())
    }

    fn zero_grads(&self) -> Grads {
        Grads {
            cells: self.cells.iter().map(CellLayer::zeros_like).collect(),
            dense_w: Array2::zeros(self.dense_w.raw_dim()),
            dense_b: Array1::zeros(self.dense_b.raw_dim()),
            out_w: Array1::zeros(self.out_w.raw_dim()),
            out_b: 0.0,
        }
    }

    fn trace(&self, sequence: ArrayView2<f64>) -> Result<Trace, RecurrentError> {
        if sequence.ncols() != self.input_dim {
            return Err(RecurrentError::ShapeMismatch {
                what: "feature columns",
                expected: self.input_dim,
                got: sequence.ncols(),
            });
        }
        if sequence.nrows() == 0 {
            return Err(RecurrentError::ShapeMismatch {
                what: "sequence length",
                expected: self.config.window,
                got: 0,
            });
        }
        let steps = sequence.nrows();
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(self.cells.len());
        let mut inputs: Vec<Array1<f64>> =
            (0..steps).map(|t| sequence.row(t).to_owned()).collect();
        for cell in &self.cells {
            let width = cell.hidden_dim();
            let mut h = Array1::zeros(width);
            let mut c = Array1::zeros(width);
            let mut layer_caches = Vec::with_capacity(steps);
            let mut outputs = Vec::with_capacity(steps);
            for x in &inputs {
                match cell {
                    CellLayer::Lstm(params) => {
                        let cache = lstm_forward(params, x.view(), h.view(), c.view())?;
                        h = cache.h.clone();
                        c = cache.c.clone();
                        outputs.push(cache.h.clone());
                        layer_caches.push(StepCache::Lstm(cache));
                    }
                    CellLayer::Gru(params) => {
                        let cache = gru_forward(params, x.view(), h.view())?;
                        h = cache.h.clone();
                        outputs.push(cache.h.clone());
                        layer_caches.push(StepCache::Gru(cache));
                    }
                }
            }
            caches.push(layer_caches);
            inputs = outputs;
        }
        let h_top = inputs.last().expect("non-empty sequence").clone();
        let pre = self.dense_w.dot(&h_top) + &self.dense_b;
        let act = pre.mapv(|v| self.config.activation.apply(v));
        let pred = self.out_w.dot(&act) + self.out_b;
        Ok(Trace { caches, head: HeadTrace { h_top, pre, act, pred } })
    }

    /// Runs one sequence (rows x features) through the network.
    pub fn predict_sequence(&self, sequence: ArrayView2<f64>) -> Result<f64, RecurrentError> {
        Ok(self.trace(sequence)?.head.pred)
    }

    /// Predicts every length-`window` run of consecutive rows; output `k`
    /// corresponds to the window ending at row `k + window - 1`.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RecurrentError> {
        let window = self.config.window;
        if features.nrows() < window {
            return Err(RecurrentError::InsufficientData {
                rows: features.nrows(),
                needed: window,
            });
        }
        let n_seq = features.nrows() - window + 1;
        let mut out = Array1::zeros(n_seq);
        for s in 0..n_seq {
            out[s] = self.predict_sequence(features.slice(ndarray::s![s..s + window, ..]))?;
        }
        Ok(out)
    }

    /// Accumulates gradients for one traced sequence, where `dpred` is the
    /// loss gradient with respect to the prediction.
    fn backward(&self, trace: &Trace, dpred: f64, grads: &mut Grads) {
        let head = &trace.head;
        grads.out_w += &(dpred * &head.act);
        grads.out_b += dpred;
        let d_act = dpred * &self.out_w;
        let d_pre = ndarray::Zip::from(&d_act)
            .and(&head.pre)
            .and(&head.act)
            .map_collect(|&da, &pre, &post| da * self.config.activation.derivative(pre, post));
        for (i, &dp) in d_pre.iter().enumerate() {
            for (j, &h) in head.h_top.iter().enumerate() {
                grads.dense_w[[i, j]] += dp * h;
            }
        }
        grads.dense_b += &d_pre;

        let steps = trace.caches[0].len();
        // Gradient w.r.t. each layer's output sequence; only the last step
        // of the top layer receives a head contribution.
        let mut dh_seq: Vec<Array1<f64>> = (0..steps)
            .map(|t| {
                if t + 1 == steps {
                    self.dense_w.t().dot(&d_pre)
                } else {
                    Array1::zeros(self.cells.last().expect("layers").hidden_dim())
                }
            })
            .collect();
        for (layer_idx, cell) in self.cells.iter().enumerate().rev() {
            let width = cell.hidden_dim();
            let mut dh_carry = Array1::zeros(width);
            let mut dc_carry = Array1::zeros(width);
            let mut dx_seq = Vec::with_capacity(steps);
            for t in (0..steps).rev() {
                let dh_total = &dh_seq[t] + &dh_carry;
                match (cell, &trace.caches[layer_idx][t], &mut grads.cells[layer_idx]) {
                    (
                        CellLayer::Lstm(params),
                        StepCache::Lstm(cache),
                        CellLayer::Lstm(layer_grads),
                    ) => {
                        let (dx, dh_prev, dc_prev) =
                            lstm_backward(params, cache, &dh_total, &dc_carry, layer_grads);
                        dh_carry = dh_prev;
                        dc_carry = dc_prev;
                        dx_seq.push(dx);
                    }
                    (CellLayer::Gru(params), StepCache::Gru(cache), CellLayer::Gru(layer_grads)) => {
                        let (dx, dh_prev) = gru_backward(params, cache, &dh_total, layer_grads);
                        dh_carry = dh_prev;
                        dx_seq.push(dx);
                    }
                    _ => unreachable!("cell kind is uniform across the network"),
                }
            }
            dx_seq.reverse();
            dh_seq = dx_seq;
        }
    }

    /// Serializes the architecture and parameters as plain text. Values use
    /// the shortest decimal representation that round-trips `f64` exactly.
    pub fn save<W: Write>(&self, writer: &mut W) -> Result<(), RecurrentError> {
        writeln!(writer, "optmc-recurrent v1")?;
        writeln!(writer, "cell {}", self.config.cell)?;
        writeln!(writer, "activation {}", self.config.activation)?;
        writeln!(writer, "input {}", self.input_dim)?;
        let hidden: Vec<String> = self.config.hidden.iter().map(usize::to_string).collect();
        writeln!(writer, "hidden {}", hidden.join(" "))?;
        writeln!(writer, "dense {}", self.config.dense)?;
        writeln!(writer, "window {}", self.config.window)?;
        let flat = self.flatten();
        writeln!(writer, "params {}", flat.len())?;
        for value in flat {
            writeln!(writer, "{value}")?;
        }
        Ok(())
    }

    /// Restores a network saved by [`Network::save`]. Training
    /// hyperparameters take their defaults; architecture, window and
    /// parameters are restored exactly.
    pub fn load<R: BufRead>(reader: &mut R) -> Result<Network, RecurrentError> {
        let mut lines = reader.lines();
        let mut next = |what: &'static str| -> Result<String, RecurrentError> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| RecurrentError::Parse(format!("missing {what} line")))
        };
        let magic = next("header")?;
        if magic != "optmc-recurrent v1" {
            return Err(RecurrentError::Parse(format!("unrecognized header '{magic}'")));
        }
        let mut field = |name: &'static str| -> Result<String, RecurrentError> {
            let line = next(name)?;
            line.strip_prefix(&format!("{name} "))
                .map(str::to_owned)
                .ok_or_else(|| RecurrentError::Parse(format!("expected '{name} ...', got '{line}'")))
        };
        let cell: CellKind = field("cell")?.parse()?;
        let activation: Activation = field("activation")?.parse()?;
        let parse_usize = |what: &str, s: &str| -> Result<usize, RecurrentError> {
            s.parse().map_err(|_| RecurrentError::Parse(format!("bad {what}: '{s}'")))
        };
        let input_dim = parse_usize("input", &field("input")?)?;
        let hidden = field("hidden")?
            .split_whitespace()
            .map(|s| parse_usize("hidden width", s))
            .collect::<Result<Vec<_>, _>>()?;
        let dense = parse_usize("dense", &field("dense")?)?;
        let window = parse_usize("window", &field("window")?)?;
        let n_params = parse_usize("params", &field("params")?)?;
        let config = NetworkConfig { cell, hidden, dense, activation, window, ..Default::default() };
        let mut network = Network::new(&config, input_dim)?;
        let mut flat = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let line = next("parameter value")?;
            flat.push(
                line.parse::<f64>()
                    .map_err(|_| RecurrentError::Parse(format!("bad parameter '{line}'")))?,
            );
        }
        network.assign_from_flat(&flat)?;
        Ok(network)
    }
}

/// Mean squared-error loss and flat parameter gradients over a set of
/// sequences. This is the objective [`train`] descends; it is public so
/// custom training loops and gradient checks can reuse it.
pub fn loss_and_gradients(
    network: &Network,
    sequences: &[ArrayView2<f64>],
    targets: &[f64],
) -> Result<(f64, Vec<f64>), RecurrentError> {
    let n = sequences.len() as f64;
    let mut grads = network.zero_grads();
    let mut loss = 0.0;
    for (seq, &target) in sequences.iter().zip(targets) {
        let trace = network.trace(*seq)?;
        let err = trace.head.pred - target;
        loss += err * err / n;
        network.backward(&trace, 2.0 * err / n, &mut grads);
    }
    let mut flat = Vec::new();
    flatten_parts(&grads.cells, &grads.dense_w, &grads.dense_b, &grads.out_w, grads.out_b, &mut flat);
    Ok((loss, flat))
}

/// One epoch's losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// A trained network together with its per-epoch loss history and the
/// sequence indices of the internal split (sequence `s` is the window
/// ending at row `s + window - 1`), each in ascending order.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Network,
    pub history: Vec<EpochStats>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

fn windows(features: ArrayView2<'_, f64>, window: usize) -> Vec<ArrayView2<'_, f64>> {
    (0..features.nrows() + 1 - window)
        .map(move |s| features.slice_move(ndarray::s![s..s + window, ..]))
        .collect()
}

fn mse_over(
    network: &Network,
    sequences: &[ArrayView2<f64>],
    targets: &[f64],
    indices: &[usize],
) -> Result<f64, RecurrentError> {
    let mut acc = 0.0;
    for &s in indices {
        let err = network.predict_sequence(sequences[s])? - targets[s];
        acc += err * err;
    }
    Ok(acc / indices.len() as f64)
}

/// Trains a fresh network on rows `features` against `targets` with an
/// internal seeded 80-20 train/validation split.
pub fn train(
    config: &NetworkConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<TrainOutput, RecurrentError> {
    config.validate()?;
    if features.nrows() != targets.len() {
        return Err(RecurrentError::ShapeMismatch {
            what: "target length",
            expected: features.nrows(),
            got: targets.len(),
        });
    }
    let n = features.nrows();
    if n < 10 {
        return Err(RecurrentError::InsufficientData { rows: n, needed: 10 });
    }
    if n < config.window {
        return Err(RecurrentError::InsufficientData { rows: n, needed: config.window });
    }
    let sequences = windows(features, config.window);
    let seq_targets: Vec<f64> =
        (0..sequences.len()).map(|s| targets[s + config.window - 1]).collect();
    let n_seq = sequences.len();
    if n_seq < 10 {
        return Err(RecurrentError::InsufficientData { rows: n_seq, needed: 10 });
    }

    let mut model = Network::new(config, features.ncols())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut indices: Vec<usize> = (0..n_seq).collect();
    indices.shuffle(&mut rng);
    let n_train = (0.8 * n_seq as f64).ceil() as usize;
    let (train_idx, val_idx) = indices.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();
    // Loss reporting uses a fixed order so epoch summaries do not depend
    // on the batch shuffle.
    let mut eval_train = train_idx.clone();
    eval_train.sort_unstable();
    let mut eval_val = val_idx.clone();
    eval_val.sort_unstable();

    let mut adam = AdamState::new(model.n_params(), config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let mut flat = model.flatten();
    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.batch_size) {
            let batch_seqs: Vec<ArrayView2<f64>> = batch.iter().map(|&s| sequences[s]).collect();
            let batch_targets: Vec<f64> = batch.iter().map(|&s| seq_targets[s]).collect();
            let (_, grads) = loss_and_gradients(&model, &batch_seqs, &batch_targets)?;
            adam.update(&mut flat, &grads)?;
            model.assign_from_flat(&flat)?;
        }
        let train_mse = mse_over(&model, &sequences, &seq_targets, &eval_train)?;
        let val_mse = if eval_val.is_empty() {
            train_mse
        } else {
            mse_over(&model, &sequences, &seq_targets, &eval_val)?
        };
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(RecurrentError::NonFiniteLoss { epoch });
        }
        history.push(EpochStats { epoch, train_mse, val_mse });
    }
    Ok(TrainOutput { model, history, train_indices: eval_train, val_indices: eval_val })
}

/// Writes the loss history as `epoch,train_mse,val_mse` CSV.
pub fn write_history_csv<W: Write>(
    history: &[EpochStats],
    writer: &mut W,
) -> Result<(), RecurrentError> {
    writeln!(writer, "epoch,train_mse,val_mse")?;
    for row in history {
        writeln!(writer, "{},{},{}", row.epoch, row.train_mse, row.val_mse)?;
    }
    Ok(())
}
