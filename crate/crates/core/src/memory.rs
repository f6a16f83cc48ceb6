//! The memory-module contract `(o_t, m_{t-1}) -> (b_t, m_t)` and the types
//! every module shares.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::baselines::{Lstm, LstmState, Mlp};
use crate::error::{Error, Result};
use crate::gcm::{Gcm, GcmState};
use crate::tensor::{ParameterStore, Tape, Tensor, Var};

/// Side information attached to an observation, read by topological priors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    /// Position in meters.
    pub position: Option<Vec<f32>>,
    /// Latent code of the observation.
    pub latent: Option<Vec<f32>>,
    /// Named discrete fields. `None` marks an absent value, which never
    /// matches anything.
    pub fields: BTreeMap<String, Option<i64>>,
}

impl Metadata {
    pub fn with_field(mut self, name: &str, value: Option<i64>) -> Self {
        self.fields.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub features: Vec<f32>,
    pub meta: Metadata,
}

impl Observation {
    pub fn new(features: Vec<f32>) -> Self {
        Self {
            features,
            meta: Metadata::default(),
        }
    }
}

/// Everything a module needs to replay one episode on a tape: the stacked
/// observation features and, for graph memories, the episode's edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeInput {
    pub len: usize,
    pub dim: usize,
    pub features: Vec<f32>,
    pub edges: Vec<(usize, usize)>,
}

impl EpisodeInput {
    pub fn from_observations(observations: &[Observation], dim: usize) -> Result<Self> {
        let mut features = Vec::with_capacity(observations.len() * dim);
        for o in observations {
            if o.features.len() != dim {
                return Err(Error::dim(
                    "episode input",
                    format!("observation has {} features, module expects {}", o.features.len(), dim),
                ));
            }
            features.extend_from_slice(&o.features);
        }
        Ok(Self {
            len: observations.len(),
            dim,
            features,
            edges: Vec::new(),
        })
    }
}

pub trait MemoryModule {
    type State: Clone + std::fmt::Debug;

    fn input_dim(&self) -> usize;

    fn belief_dim(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    /// Registers freshly initialized parameters in `store`.
    fn init_params(&self, store: &mut ParameterStore, rng: &mut dyn RngCore) -> Result<()>;

    fn param_count(&self) -> usize;

    /// One no-grad memory update.
    fn step(
        &self,
        params: &ParameterStore,
        obs: &Observation,
        state: Self::State,
    ) -> Result<(Vec<f32>, Self::State)>;

    fn prepare_episode(&self, observations: &[Observation]) -> Result<EpisodeInput>;

    /// Differentiable beliefs for every step of every episode, each episode
    /// replayed from its initial state. Rows are episode-major.
    fn forward_episodes(
        &self,
        tape: &mut Tape,
        params: &ParameterStore,
        episodes: &[&EpisodeInput],
    ) -> Result<Var>;
}

/// PyTorch-style linear initialization: weights and bias uniform in
/// `±1/sqrt(fan_in)`.
pub(crate) fn init_linear(
    store: &mut ParameterStore,
    rng: &mut dyn RngCore,
    weight: &str,
    bias: Option<&str>,
    fan_in: usize,
    fan_out: usize,
) -> Result<()> {
    let k = 1.0 / (fan_in.max(1) as f32).sqrt();
    let w = (0..fan_in * fan_out).map(|_| rng.random_range(-k..=k)).collect();
    store.insert(weight, Tensor::new(vec![fan_in, fan_out], w)?)?;
    if let Some(b) = bias {
        let v = (0..fan_out).map(|_| rng.random_range(-k..=k)).collect();
        store.insert(b, Tensor::vector(v))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyMemory {
    Gcm(Gcm),
    Mlp(Mlp),
    Lstm(Lstm),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyState {
    Gcm(GcmState),
    Mlp,
    Lstm(LstmState),
}

impl AnyMemory {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyMemory::Gcm(_) => "gcm",
            AnyMemory::Mlp(_) => "mlp",
            AnyMemory::Lstm(_) => "lstm",
        }
    }
}

fn state_mismatch() -> Error {
    Error::Contract("memory state does not belong to this module".into())
}

impl MemoryModule for AnyMemory {
    type State = AnyState;

    fn input_dim(&self) -> usize {
        match self {
            AnyMemory::Gcm(m) => m.input_dim(),
            AnyMemory::Mlp(m) => m.input_dim(),
            AnyMemory::Lstm(m) => m.input_dim(),
        }
    }

    fn belief_dim(&self) -> usize {
        match self {
            AnyMemory::Gcm(m) => m.belief_dim(),
            AnyMemory::Mlp(m) => m.belief_dim(),
            AnyMemory::Lstm(m) => m.belief_dim(),
        }
    }

    fn initial_state(&self) -> AnyState {
        match self {
            AnyMemory::Gcm(m) => AnyState::Gcm(m.initial_state()),
            AnyMemory::Mlp(_) => AnyState::Mlp,
            AnyMemory::Lstm(m) => AnyState::Lstm(m.initial_state()),
        }
    }

    fn init_params(&self, store: &mut ParameterStore, rng: &mut dyn RngCore) -> Result<()> {
        match self {
            AnyMemory::Gcm(m) => m.init_params(store, rng),
            AnyMemory::Mlp(m) => m.init_params(store, rng),
            AnyMemory::Lstm(m) => m.init_params(store, rng),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            AnyMemory::Gcm(m) => m.param_count(),
            AnyMemory::Mlp(m) => m.param_count(),
            AnyMemory::Lstm(m) => m.param_count(),
        }
    }

    fn step(
        &self,
        params: &ParameterStore,
        obs: &Observation,
        state: AnyState,
    ) -> Result<(Vec<f32>, AnyState)> {
        match (self, state) {
            (AnyMemory::Gcm(m), AnyState::Gcm(s)) => {
                let (b, s) = m.step(params, obs, s)?;
                Ok((b, AnyState::Gcm(s)))
            }
            (AnyMemory::Mlp(m), AnyState::Mlp) => {
                let (b, ()) = m.step(params, obs, ())?;
                Ok((b, AnyState::Mlp))
            }
            (AnyMemory::Lstm(m), AnyState::Lstm(s)) => {
                let (b, s) = m.step(params, obs, s)?;
                Ok((b, AnyState::Lstm(s)))
            }
            _ => Err(state_mismatch()),
        }
    }

    fn prepare_episode(&self, observations: &[Observation]) -> Result<EpisodeInput> {
        match self {
            AnyMemory::Gcm(m) => m.prepare_episode(observations),
            AnyMemory::Mlp(m) => m.prepare_episode(observations),
            AnyMemory::Lstm(m) => m.prepare_episode(observations),
        }
    }

    fn forward_episodes(
        &self,
        tape: &mut Tape,
        params: &ParameterStore,
        episodes: &[&EpisodeInput],
    ) -> Result<Var> {
        match self {
            AnyMemory::Gcm(m) => m.forward_episodes(tape, params, episodes),
            AnyMemory::Mlp(m) => m.forward_episodes(tape, params, episodes),
            AnyMemory::Lstm(m) => m.forward_episodes(tape, params, episodes),
        }
    }
}

/// Concatenates episode features into one `N×d` constant on the tape.
pub(crate) fn stack_features(tape: &mut Tape, episodes: &[&EpisodeInput], dim: usize) -> Result<(Var, usize)> {
    let total: usize = episodes.iter().map(|e| e.len).sum();
    let mut data = Vec::with_capacity(total * dim);
    for e in episodes {
        if e.dim != dim {
            return Err(Error::dim("forward_episodes", format!("episode dim {} vs module dim {}", e.dim, dim)));
        }
        data.extend_from_slice(&e.features);
    }
    Ok((tape.constant(vec![total, dim], data)?, total))
}
