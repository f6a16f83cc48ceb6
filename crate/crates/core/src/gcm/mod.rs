//! Graph convolutional memory.
//!
//! Each observation becomes a vertex of an episodic knowledge graph. A
//! topological prior decides which earlier vertices link to the new one, and
//! a stack of k-GNN graph convolutions reads the graph:
//!
//! ```text
//! z_i^h = σ(W₁ʰ z_i^{h-1} + bʰ + W₂ʰ agg{ z_j^{h-1} : (j, i) ∈ E })
//! ```
//!
//! with `z_i^0 = o_i` and `agg(∅) = 0`. The belief is the last layer's
//! embedding at the newest vertex. Edges only point from older to newer
//! vertices, so a vertex's embedding depends on nothing inserted after it.

mod graph;
mod prior;

use std::rc::Rc;

use rand::RngCore;

pub use graph::{insert_observation, parse_edge_list, MemoryState};
pub use prior::{eval_prior, parse_prior, LatentMetric, PriorSpec};

use crate::error::{Error, Result};
use crate::memory::{init_linear, stack_features, EpisodeInput, MemoryModule, Observation};
use crate::tensor::kernels;
use crate::tensor::{ParameterStore, Reduction, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
        }
    }

    fn apply_scalar(self, x: f32) -> f32 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcmConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub activation: Activation,
    pub aggregation: Reduction,
    pub prior: PriorSpec,
}

impl GcmConfig {
    /// Two tanh layers with sum aggregation.
    pub fn new(input_dim: usize, hidden: usize, prior: PriorSpec) -> Self {
        Self {
            input_dim,
            hidden,
            layers: 2,
            activation: Activation::Tanh,
            aggregation: Reduction::Sum,
            prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.input_dim == 0 {
            return Err(Error::Config("graph memory needs positive input dim, hidden size and layer count".into()));
        }
        self.prior.validate()
    }

    fn layer_in(&self, h: usize) -> usize {
        if h == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}

pub fn root_weight(h: usize) -> String {
    format!("memory.gc{}.root_weight", h)
}

pub fn root_bias(h: usize) -> String {
    format!("memory.gc{}.root_bias", h)
}

pub fn neighbor_weight(h: usize) -> String {
    format!("memory.gc{}.neighbor_weight", h)
}

/// Trainable scalars: per layer `W₁`, `b` and `W₂`.
pub fn gcm_param_count(config: &GcmConfig) -> usize {
    (0..config.layers)
        .map(|h| {
            let i = config.layer_in(h);
            i * config.hidden + config.hidden + i * config.hidden
        })
        .sum()
}

/// Runs the convolution stack over `n` vertices whose features are `features`
/// and whose edges are `edges`. Returns the `n×|z|` final embeddings.
fn convolve(
    tape: &mut Tape,
    params: &ParameterStore,
    config: &GcmConfig,
    features: Var,
    n: usize,
    edges: Rc<[(usize, usize)]>,
) -> Result<Var> {
    let mut h_prev = features;
    for h in 0..config.layers {
        let w1 = tape.param(params, &root_weight(h))?;
        let b = tape.param(params, &root_bias(h))?;
        let w2 = tape.param(params, &neighbor_weight(h))?;
        if tape.shape(w1) != [config.layer_in(h), config.hidden] || tape.shape(w2) != tape.shape(w1) {
            return Err(Error::dim("gnn_forward", format!("layer {} weights have the wrong shape", h)));
        }
        let root = tape.matmul(h_prev, w1)?;
        let root = tape.add_row(root, b)?;
        let agg = tape.aggregate(h_prev, Rc::clone(&edges), n, config.aggregation)?;
        let neigh = tape.matmul(agg, w2)?;
        let pre = tape.add(root, neigh)?;
        h_prev = config.activation.apply(tape, pre)?;
    }
    Ok(h_prev)
}

/// Differentiable embeddings `Z` (`t×|z|`) of every vertex in `state`.
/// Stored observations are constants; only parameters receive gradients.
pub fn gnn_forward(tape: &mut Tape, params: &ParameterStore, state: &MemoryState, config: &GcmConfig) -> Result<Var> {
    if state.is_empty() {
        return Err(Error::Contract("graph convolution over an empty graph".into()));
    }
    if state.dim() != config.input_dim {
        return Err(Error::dim("gnn_forward", format!("graph dim {} vs config {}", state.dim(), config.input_dim)));
    }
    let n = state.len();
    let x = tape.constant(vec![n, state.dim()], state.vertices().to_vec())?;
    convolve(tape, params, config, x, n, state.edges().into())
}

/// One memory update: insert the observation, convolve the whole graph and
/// read the newest vertex's embedding as the belief.
pub fn gcm_step(
    obs: &Observation,
    state: MemoryState,
    params: &ParameterStore,
    config: &GcmConfig,
) -> Result<(Vec<f32>, MemoryState)> {
    let state = insert_observation(state, obs, &config.prior)?;
    let mut tape = Tape::new();
    let z = gnn_forward(&mut tape, params, &state, config)?;
    let newest = tape.gather_rows(z, &[state.len() - 1])?;
    Ok((tape.value(newest).to_vec(), state))
}

/// Graph memory module. Its running state caches each layer's embeddings so
/// a step only convolves the new vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Gcm {
    pub config: GcmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcmState {
    pub graph: MemoryState,
    /// `layers[h]` holds the row-major layer-`h+1` embeddings of every vertex.
    layers: Vec<Vec<f32>>,
}

impl Gcm {
    pub fn new(config: GcmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl MemoryModule for Gcm {
    type State = GcmState;

    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn belief_dim(&self) -> usize {
        self.config.hidden
    }

    fn initial_state(&self) -> GcmState {
        GcmState {
            graph: MemoryState::new(self.config.input_dim),
            layers: vec![Vec::new(); self.config.layers],
        }
    }

    fn init_params(&self, store: &mut ParameterStore, rng: &mut dyn RngCore) -> Result<()> {
        for h in 0..self.config.layers {
            let i = self.config.layer_in(h);
            init_linear(store, rng, &root_weight(h), Some(&root_bias(h)), i, self.config.hidden)?;
            init_linear(store, rng, &neighbor_weight(h), None, i, self.config.hidden)?;
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        gcm_param_count(&self.config)
    }

    fn step(&self, params: &ParameterStore, obs: &Observation, mut state: GcmState) -> Result<(Vec<f32>, GcmState)> {
        let cfg = &self.config;
        state.graph.insert(obs, &cfg.prior)?;
        let i = state.graph.len() - 1;
        let neighbors = state.graph.neighborhood(i)?.to_vec();
        let z = cfg.hidden;
        let mut x = obs.features.clone();
        for h in 0..cfg.layers {
            let width = cfg.layer_in(h);
            let prev: &[f32] = if h == 0 {
                state.graph.vertices()
            } else {
                &state.layers[h - 1]
            };
            let mut agg = vec![0.0f32; width];
            for &j in &neighbors {
                for (a, &v) in agg.iter_mut().zip(&prev[j * width..(j + 1) * width]) {
                    *a += v;
                }
            }
            if cfg.aggregation == Reduction::Mean && !neighbors.is_empty() {
                let inv = 1.0 / neighbors.len() as f32;
                agg.iter_mut().for_each(|v| *v *= inv);
            }
            let w1 = params.get(&root_weight(h))?;
            let b = params.get(&root_bias(h))?;
            let w2 = params.get(&neighbor_weight(h))?;
            if w1.len() != width * z || w2.len() != width * z || b.len() != z {
                return Err(Error::dim("gcm step", format!("layer {} weights have the wrong shape", h)));
            }
            let root = kernels::linear_row(&x, w1.data(), b.data());
            let mut neigh = vec![0.0f32; z];
            kernels::matmul(&agg, w2.data(), &mut neigh, 1, width, z);
            let out: Vec<f32> = root
                .iter()
                .zip(&neigh)
                .map(|(&r, &n)| cfg.activation.apply_scalar(r + n))
                .collect();
            if !kernels::all_finite(&out) {
                return Err(Error::NonFinite { op: "gcm step" });
            }
            state.layers[h].extend_from_slice(&out);
            x = out;
        }
        Ok((x, state))
    }

    fn prepare_episode(&self, observations: &[Observation]) -> Result<EpisodeInput> {
        let mut graph = MemoryState::new(self.config.input_dim);
        for o in observations {
            graph.insert(o, &self.config.prior)?;
        }
        let mut input = EpisodeInput::from_observations(observations, self.config.input_dim)?;
        input.edges = graph.edges().to_vec();
        Ok(input)
    }

    fn forward_episodes(&self, tape: &mut Tape, params: &ParameterStore, episodes: &[&EpisodeInput]) -> Result<Var> {
        let (x, n) = stack_features(tape, episodes, self.config.input_dim)?;
        let mut edges = Vec::with_capacity(episodes.iter().map(|e| e.edges.len()).sum());
        let mut offset = 0;
        for e in episodes {
            edges.extend(e.edges.iter().map(|&(j, i)| (j + offset, i + offset)));
            offset += e.len;
        }
        convolve(tape, params, &self.config, x, n, edges.into())
    }
}
