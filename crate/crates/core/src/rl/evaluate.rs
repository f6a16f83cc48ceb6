use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::PolicyModel;
use super::rollout::{greedy_action, sample_action};
use crate::env::EnvSpec;
use crate::error::Result;
use crate::memory::{AnyState, Observation};

/// Anything that picks actions from observations and keeps its own memory.
pub trait Agent {
    /// Forgets everything from the previous episode.
    fn begin_episode(&mut self);

    fn act(&mut self, obs: &Observation, rng: &mut dyn RngCore) -> Result<usize>;
}

/// A trained policy run either greedily or by sampling.
pub struct ModelAgent<'a> {
    model: &'a PolicyModel,
    state: Option<AnyState>,
    greedy: bool,
}

impl<'a> ModelAgent<'a> {
    pub fn new(model: &'a PolicyModel, greedy: bool) -> Self {
        Self {
            model,
            state: None,
            greedy,
        }
    }
}

impl Agent for ModelAgent<'_> {
    fn begin_episode(&mut self) {
        self.state = Some(self.model.initial_state());
    }

    fn act(&mut self, obs: &Observation, rng: &mut dyn RngCore) -> Result<usize> {
        let state = self.state.take().unwrap_or_else(|| self.model.initial_state());
        let (step, next) = self.model.step(obs, state)?;
        self.state = Some(next);
        if self.greedy {
            Ok(greedy_action(&step.log_probs))
        } else {
            sample_action(&step.log_probs, rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Mean over `returns`; zero when no episode was run.
    pub mean_return: f64,
    pub returns: Vec<f64>,
    pub lengths: Vec<usize>,
}

/// Plays `episodes` full episodes on a fresh environment seeded with `seed`.
pub fn evaluate(agent: &mut dyn Agent, env: &EnvSpec, episodes: usize, seed: u64) -> Result<EvalResult> {
    let mut returns = Vec::with_capacity(episodes);
    let mut lengths = Vec::with_capacity(episodes);
    if episodes > 0 {
        let mut e = env.build(seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e7a1);
        for _ in 0..episodes {
            agent.begin_episode();
            let mut obs = e.reset().observation;
            let mut total = 0.0f64;
            let mut len = 0;
            loop {
                let a = agent.act(&obs, &mut rng)?;
                let r = e.step(a)?;
                total += f64::from(r.reward);
                len += 1;
                obs = r.observation;
                if r.done {
                    break;
                }
            }
            returns.push(total);
            lengths.push(len);
        }
    }
    let mean_return = if returns.is_empty() {
        0.0
    } else {
        returns.iter().sum::<f64>() / returns.len() as f64
    };
    Ok(EvalResult {
        mean_return,
        returns,
        lengths,
    })
}
