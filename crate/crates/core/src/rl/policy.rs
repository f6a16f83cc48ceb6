use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::memory::{AnyMemory, AnyState, EpisodeInput, MemoryModule, Observation};
use crate::tensor::kernels;
use crate::tensor::{ParameterStore, Tape, Tensor, Var};

pub const ACTOR_WEIGHT: &str = "actor.weight";
pub const ACTOR_BIAS: &str = "actor.bias";
pub const CRITIC_WEIGHT: &str = "critic.weight";
pub const CRITIC_BIAS: &str = "critic.bias";

/// Parameters in the actor and critic heads for belief width `z`.
pub fn head_param_count(z: usize, num_actions: usize) -> usize {
    z * num_actions + num_actions + z + 1
}

/// Normal columns rescaled so each output unit's weight vector has norm `std`.
fn normc(rng: &mut dyn RngCore, fan_in: usize, fan_out: usize, std: f32) -> Vec<f32> {
    let mut w: Vec<f32> = (0..fan_in * fan_out).map(|_| StandardNormal.sample(&mut *rng)).collect();
    for c in 0..fan_out {
        let norm: f32 = (0..fan_in).map(|r| w[r * fan_out + c].powi(2)).sum::<f32>().sqrt();
        if norm > 0.0 {
            for r in 0..fan_in {
                w[r * fan_out + c] *= std / norm;
            }
        }
    }
    w
}

/// Output of one no-grad policy step.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    pub logits: Vec<f32>,
    pub log_probs: Vec<f32>,
    pub value: f32,
}

/// A memory module whose belief feeds a categorical actor head and a scalar
/// critic head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub memory: AnyMemory,
    pub num_actions: usize,
    pub params: ParameterStore,
}

impl PolicyModel {
    pub fn new(memory: AnyMemory, num_actions: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if num_actions == 0 {
            return Err(Error::Config("policy needs at least one action".into()));
        }
        let mut params = ParameterStore::new();
        memory.init_params(&mut params, rng)?;
        let z = memory.belief_dim();
        params.insert(ACTOR_WEIGHT, Tensor::new(vec![z, num_actions], normc(rng, z, num_actions, 0.01))?)?;
        params.insert(ACTOR_BIAS, Tensor::zeros(vec![num_actions]))?;
        params.insert(CRITIC_WEIGHT, Tensor::new(vec![z, 1], normc(rng, z, 1, 1.0))?)?;
        params.insert(CRITIC_BIAS, Tensor::zeros(vec![1]))?;
        Ok(Self {
            memory,
            num_actions,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.memory.param_count() + head_param_count(self.memory.belief_dim(), self.num_actions)
    }

    pub fn initial_state(&self) -> AnyState {
        self.memory.initial_state()
    }

    /// Applies both heads to a belief row.
    pub fn heads(&self, belief: &[f32]) -> Result<PolicyStep> {
        let p = &self.params;
        let logits = kernels::linear_row(belief, p.get(ACTOR_WEIGHT)?.data(), p.get(ACTOR_BIAS)?.data());
        let value = kernels::linear_row(belief, p.get(CRITIC_WEIGHT)?.data(), p.get(CRITIC_BIAS)?.data())[0];
        let mut log_probs = vec![0.0; logits.len()];
        kernels::log_softmax_row(&logits, &mut log_probs);
        if !kernels::all_finite(&log_probs) || !value.is_finite() {
            return Err(Error::NonFinite { op: "policy heads" });
        }
        Ok(PolicyStep {
            logits,
            log_probs,
            value,
        })
    }

    /// Advances the memory by one observation and evaluates the heads.
    pub fn step(&self, obs: &Observation, state: AnyState) -> Result<(PolicyStep, AnyState)> {
        let (belief, state) = self.memory.step(&self.params, obs, state)?;
        Ok((self.heads(&belief)?, state))
    }

    /// Differentiable logits `[N×A]` and values `[N]` for whole episodes,
    /// rows episode-major.
    pub fn forward_batch(&self, tape: &mut Tape, episodes: &[&EpisodeInput]) -> Result<(Var, Var)> {
        let beliefs = self.memory.forward_episodes(tape, &self.params, episodes)?;
        let n = tape.shape(beliefs)[0];
        let aw = tape.param(&self.params, ACTOR_WEIGHT)?;
        let ab = tape.param(&self.params, ACTOR_BIAS)?;
        let cw = tape.param(&self.params, CRITIC_WEIGHT)?;
        let cb = tape.param(&self.params, CRITIC_BIAS)?;
        let logits = tape.matmul(beliefs, aw)?;
        let logits = tape.add_row(logits, ab)?;
        let values = tape.matmul(beliefs, cw)?;
        let values = tape.add_row(values, cb)?;
        let values = tape.reshape(values, vec![n])?;
        Ok((logits, values))
    }
}
