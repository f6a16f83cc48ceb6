use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::PolicyModel;
use super::rollout::collect_rollouts;
use super::update::{a2c_update, ppo_update, prepare_batch};
use super::{Algorithm, TrainConfig};
use crate::env::Environment;
use crate::error::{Error, Result};

/// One row of the training metrics stream. Returns cover episodes that
/// finished inside the iteration's batch; they are NaN when none did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub grad_norm: f64,
    pub wall_clock_s: f64,
}

/// The collect-then-update loop for one seed.
pub struct Trainer {
    pub model: PolicyModel,
    pub config: TrainConfig,
    env: Box<dyn Environment>,
    rng: ChaCha8Rng,
    kl_coeff: f32,
    iteration: usize,
    env_steps: usize,
    episodes: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(model: PolicyModel, config: TrainConfig, env: Box<dyn Environment>, seed: u64) -> Result<Self> {
        config.validate()?;
        if env.num_actions() != model.num_actions {
            return Err(Error::Config(format!(
                "environment has {} actions, policy has {}",
                env.num_actions(),
                model.num_actions
            )));
        }
        Ok(Self {
            kl_coeff: config.kl_coeff,
            model,
            config,
            env,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            env_steps: 0,
            episodes: 0,
            started: Instant::now(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn kl_coeff(&self) -> f32 {
        self.kl_coeff
    }

    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        let first_id = self.episodes as u64;
        let trajs = collect_rollouts(
            &self.model,
            self.env.as_mut(),
            self.config.batch_size,
            first_id,
            &mut self.rng,
        )?;
        let finished: Vec<f64> = trajs.iter().filter(|t| t.is_complete()).map(|t| t.total_reward()).collect();
        let batch = prepare_batch(&self.model, &trajs, &self.config)?;
        let update = match self.config.algorithm {
            Algorithm::Ppo => ppo_update(&mut self.model, &batch, &self.config, self.kl_coeff, &mut self.rng)?,
            Algorithm::A2c => a2c_update(&mut self.model, &batch, &self.config)?,
        };
        if self.config.algorithm == Algorithm::Ppo {
            self.kl_coeff = update.kl_coeff;
        }
        self.iteration += 1;
        self.env_steps += batch.steps();
        self.episodes += trajs.len();
        let (mean, min, max) = if finished.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                finished.iter().sum::<f64>() / finished.len() as f64,
                finished.iter().copied().fold(f64::INFINITY, f64::min),
                finished.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        Ok(IterationMetrics {
            iteration: self.iteration,
            env_steps: self.env_steps,
            episodes: finished.len(),
            mean_return: mean,
            min_return: min,
            max_return: max,
            policy_loss: update.policy_loss,
            value_loss: update.value_loss,
            entropy: update.entropy,
            kl: update.kl,
            grad_norm: update.grad_norm,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        })
    }
}
