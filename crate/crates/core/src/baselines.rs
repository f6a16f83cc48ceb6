//! Comparison memory modules: a stateless two-layer MLP and an MLP followed
//! by an LSTM cell.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::memory::{init_linear, stack_features, EpisodeInput, MemoryModule, Observation};
use crate::tensor::kernels;
use crate::tensor::{ParameterStore, Tape, Tensor, Var};

const MLP_W: [&str; 2] = ["memory.mlp0.weight", "memory.mlp1.weight"];
const MLP_B: [&str; 2] = ["memory.mlp0.bias", "memory.mlp1.bias"];
pub const LSTM_W_IH: &str = "memory.lstm.w_ih";
pub const LSTM_W_HH: &str = "memory.lstm.w_hh";
pub const LSTM_BIAS: &str = "memory.lstm.bias";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Mlp,
    Lstm,
}

/// Trainable scalars of a baseline module with input width `d` and hidden
/// width `hidden`.
pub fn baseline_param_count(kind: BaselineKind, d: usize, hidden: usize) -> usize {
    let mlp = (d * hidden + hidden) + (hidden * hidden + hidden);
    match kind {
        BaselineKind::Mlp => mlp,
        BaselineKind::Lstm => mlp + 4 * (hidden * hidden + hidden * hidden + hidden),
    }
}

fn check_dim(obs: &Observation, d: usize) -> Result<()> {
    if obs.features.len() != d {
        return Err(Error::dim("memory step", format!("observation has {} features, expected {}", obs.features.len(), d)));
    }
    Ok(())
}

/// `tanh(W₂ tanh(W₁ o + b₁) + b₂)`
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden: usize,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        Self { input_dim, hidden }
    }

    fn forward_row(&self, params: &ParameterStore, x: &[f32]) -> Result<Vec<f32>> {
        let mut h = x.to_vec();
        for l in 0..2 {
            let w = params.get(MLP_W[l])?;
            let b = params.get(MLP_B[l])?;
            if w.len() != h.len() * self.hidden || b.len() != self.hidden {
                return Err(Error::dim("mlp", format!("layer {} weights have the wrong shape", l)));
            }
            h = kernels::linear_row(&h, w.data(), b.data());
            h.iter_mut().for_each(|v| *v = v.tanh());
        }
        Ok(h)
    }

    fn forward_tape(&self, tape: &mut Tape, params: &ParameterStore, x: Var) -> Result<Var> {
        let mut h = x;
        for l in 0..2 {
            let w = tape.param(params, MLP_W[l])?;
            let b = tape.param(params, MLP_B[l])?;
            let y = tape.matmul(h, w)?;
            let y = tape.add_row(y, b)?;
            h = tape.tanh(y)?;
        }
        Ok(h)
    }
}

/// Stateless step: the belief is a function of the current observation only.
pub fn mlp_step(mlp: &Mlp, params: &ParameterStore, obs: &Observation) -> Result<Vec<f32>> {
    check_dim(obs, mlp.input_dim)?;
    mlp.forward_row(params, &obs.features)
}

impl MemoryModule for Mlp {
    type State = ();

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn belief_dim(&self) -> usize {
        self.hidden
    }

    fn initial_state(&self) {}

    fn init_params(&self, store: &mut ParameterStore, rng: &mut dyn RngCore) -> Result<()> {
        init_linear(store, rng, MLP_W[0], Some(MLP_B[0]), self.input_dim, self.hidden)?;
        init_linear(store, rng, MLP_W[1], Some(MLP_B[1]), self.hidden, self.hidden)
    }

    fn param_count(&self) -> usize {
        baseline_param_count(BaselineKind::Mlp, self.input_dim, self.hidden)
    }

    fn step(&self, params: &ParameterStore, obs: &Observation, _state: ()) -> Result<(Vec<f32>, ())> {
        Ok((mlp_step(self, params, obs)?, ()))
    }

    fn prepare_episode(&self, observations: &[Observation]) -> Result<EpisodeInput> {
        EpisodeInput::from_observations(observations, self.input_dim)
    }

    fn forward_episodes(&self, tape: &mut Tape, params: &ParameterStore, episodes: &[&EpisodeInput]) -> Result<Var> {
        let (x, _) = stack_features(tape, episodes, self.input_dim)?;
        self.forward_tape(tape, params, x)
    }
}

/// MLP preprocessor followed by an LSTM cell. Gates use one fused layout in
/// the order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub mlp: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl Lstm {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        Self {
            mlp: Mlp::new(input_dim, hidden),
        }
    }

    fn hidden(&self) -> usize {
        self.mlp.hidden
    }
}

/// One LSTM update on the MLP-encoded observation. The new hidden vector is
/// the belief.
pub fn lstm_step(lstm: &Lstm, params: &ParameterStore, obs: &Observation, state: LstmState) -> Result<(Vec<f32>, LstmState)> {
    check_dim(obs, lstm.mlp.input_dim)?;
    let z = lstm.hidden();
    if state.h.len() != z || state.c.len() != z {
        return Err(Error::dim("lstm step", "state width differs from hidden size"));
    }
    let x = lstm.mlp.forward_row(params, &obs.features)?;
    let w_ih = params.get(LSTM_W_IH)?;
    let w_hh = params.get(LSTM_W_HH)?;
    let bias = params.get(LSTM_BIAS)?;
    if w_ih.len() != z * 4 * z || w_hh.len() != z * 4 * z || bias.len() != 4 * z {
        return Err(Error::dim("lstm step", "gate weights have the wrong shape"));
    }
    let xg = kernels::linear_row(&x, w_ih.data(), bias.data());
    let mut hg = vec![0.0f32; 4 * z];
    kernels::matmul(&state.h, w_hh.data(), &mut hg, 1, z, 4 * z);
    let gates: Vec<f32> = xg.iter().zip(&hg).map(|(a, b)| a + b).collect();
    let mut h = vec![0.0f32; z];
    let mut c = vec![0.0f32; z];
    for k in 0..z {
        let i = kernels::sigmoid(gates[k]);
        let f = kernels::sigmoid(gates[z + k]);
        let g = gates[2 * z + k].tanh();
        let o = kernels::sigmoid(gates[3 * z + k]);
        c[k] = f * state.c[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    if !kernels::all_finite(&h) || !kernels::all_finite(&c) {
        return Err(Error::NonFinite { op: "lstm step" });
    }
    Ok((h.clone(), LstmState { h, c }))
}

impl MemoryModule for Lstm {
    type State = LstmState;

    fn input_dim(&self) -> usize {
        self.mlp.input_dim
    }

    fn belief_dim(&self) -> usize {
        self.hidden()
    }

    fn initial_state(&self) -> LstmState {
        LstmState {
            h: vec![0.0; self.hidden()],
            c: vec![0.0; self.hidden()],
        }
    }

    fn init_params(&self, store: &mut ParameterStore, rng: &mut dyn RngCore) -> Result<()> {
        self.mlp.init_params(store, rng)?;
        let z = self.hidden();
        let k = 1.0 / (z as f32).sqrt();
        for name in [LSTM_W_IH, LSTM_W_HH] {
            let w = (0..z * 4 * z).map(|_| rng.random_range(-k..=k)).collect();
            store.insert(name, Tensor::new(vec![z, 4 * z], w)?)?;
        }
        store.insert(LSTM_BIAS, Tensor::vector(vec![0.0; 4 * z]))
    }

    fn param_count(&self) -> usize {
        baseline_param_count(BaselineKind::Lstm, self.mlp.input_dim, self.hidden())
    }

    fn step(&self, params: &ParameterStore, obs: &Observation, state: LstmState) -> Result<(Vec<f32>, LstmState)> {
        lstm_step(self, params, obs, state)
    }

    fn prepare_episode(&self, observations: &[Observation]) -> Result<EpisodeInput> {
        EpisodeInput::from_observations(observations, self.mlp.input_dim)
    }

    /// Unrolls all episodes together, time-major. Episodes are ordered by
    /// decreasing length so the live ones at step `k` form a prefix.
    fn forward_episodes(&self, tape: &mut Tape, params: &ParameterStore, episodes: &[&EpisodeInput]) -> Result<Var> {
        let z = self.hidden();
        let (x, total) = stack_features(tape, episodes, self.mlp.input_dim)?;
        let enc = self.mlp.forward_tape(tape, params, x)?;
        let w_ih = tape.param(params, LSTM_W_IH)?;
        let w_hh = tape.param(params, LSTM_W_HH)?;
        let bias = tape.param(params, LSTM_BIAS)?;

        let mut offsets = Vec::with_capacity(episodes.len());
        let mut acc = 0;
        for e in episodes {
            offsets.push(acc);
            acc += e.len;
        }
        let mut order: Vec<usize> = (0..episodes.len()).filter(|&e| episodes[e].len > 0).collect();
        order.sort_by_key(|&e| std::cmp::Reverse(episodes[e].len));
        let max_len = order.first().map_or(0, |&e| episodes[e].len);

        let live0 = order.len();
        let mut h = tape.constant(vec![live0, z], vec![0.0; live0 * z])?;
        let mut c = tape.constant(vec![live0, z], vec![0.0; live0 * z])?;
        let mut outputs = Vec::with_capacity(max_len);
        let mut position = vec![0usize; total];
        let mut emitted = 0;
        for k in 0..max_len {
            let live = order.iter().take_while(|&&e| episodes[e].len > k).count();
            if live < tape.shape(h)[0] {
                let keep: Vec<usize> = (0..live).collect();
                h = tape.gather_rows(h, &keep)?;
                c = tape.gather_rows(c, &keep)?;
            }
            let rows: Vec<usize> = order[..live].iter().map(|&e| offsets[e] + k).collect();
            for (slot, &r) in rows.iter().enumerate() {
                position[r] = emitted + slot;
            }
            emitted += live;
            let xk = tape.gather_rows(enc, &rows)?;
            let xg = tape.matmul(xk, w_ih)?;
            let xg = tape.add_row(xg, bias)?;
            let hg = tape.matmul(h, w_hh)?;
            let gates = tape.add(xg, hg)?;
            let i = tape.slice_cols(gates, 0, z)?;
            let i = tape.sigmoid(i)?;
            let f = tape.slice_cols(gates, z, 2 * z)?;
            let f = tape.sigmoid(f)?;
            let g = tape.slice_cols(gates, 2 * z, 3 * z)?;
            let g = tape.tanh(g)?;
            let o = tape.slice_cols(gates, 3 * z, 4 * z)?;
            let o = tape.sigmoid(o)?;
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            c = tape.add(fc, ig)?;
            let tc = tape.tanh(c)?;
            h = tape.mul(o, tc)?;
            outputs.push(h);
        }
        if outputs.is_empty() {
            return tape.constant(vec![0, z], Vec::new());
        }
        let stacked = tape.concat_rows(&outputs)?;
        tape.gather_rows(stacked, &position)
    }
}
