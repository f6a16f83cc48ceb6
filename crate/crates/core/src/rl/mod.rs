//! Actor-critic training over any memory module: rollouts, GAE, PPO and
//! synchronous A2C.
//!
//! One training iteration collects a batch of `batch_size` environment steps
//! with the current policy and then runs one update phase on it.

mod evaluate;
mod loss;
mod policy;
mod rollout;
mod trainer;
mod update;

pub use evaluate::{evaluate, Agent, EvalResult, ModelAgent};
pub use loss::{a2c_loss, ppo_loss, LossInputs, LossTerms, PpoCoefficients};
pub use policy::{head_param_count, PolicyModel, PolicyStep, ACTOR_BIAS, ACTOR_WEIGHT, CRITIC_BIAS, CRITIC_WEIGHT};
pub use rollout::{collect_rollouts, compute_gae, greedy_action, sample_action, Advantages, Trajectory};
pub use trainer::{IterationMetrics, Trainer};
pub use update::{
    a2c_update, adapt_kl_coeff, pack_minibatches, ppo_update, prepare_batch, PreparedBatch, PreparedEpisode,
    UpdateMetrics,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ppo,
    A2c,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub lambda: f64,
    pub vf_coeff: f32,
    pub entropy_coeff: f32,
    pub grad_clip: f32,
    pub lr: f32,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub sgd_iters: usize,
    pub clip_param: f32,
    pub vf_clip: f32,
    pub kl_target: f32,
    pub kl_coeff: f32,
    pub normalize_advantages: bool,
}

impl TrainConfig {
    /// PPO settings used for partially observable cartpole.
    pub fn ppo_cartpole() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            gamma: 0.99,
            lambda: 1.0,
            vf_coeff: 1e-5,
            entropy_coeff: 0.0,
            grad_clip: 40.0,
            lr: 5e-5,
            batch_size: 5000,
            minibatch_size: 128,
            sgd_iters: 35,
            clip_param: 0.3,
            vf_clip: 10.0,
            kl_target: 0.01,
            kl_coeff: 0.2,
            normalize_advantages: true,
        }
    }

    /// Single-worker A2C settings used for the memory card game.
    pub fn a2c_cardgame() -> Self {
        Self {
            algorithm: Algorithm::A2c,
            gamma: 0.99,
            lambda: 1.0,
            vf_coeff: 0.05,
            entropy_coeff: 0.001,
            grad_clip: 40.0,
            lr: 5e-4,
            batch_size: 2000,
            minibatch_size: 2000,
            sgd_iters: 1,
            clip_param: 0.3,
            vf_clip: 10.0,
            kl_target: 0.01,
            kl_coeff: 0.0,
            normalize_advantages: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma as f32,
            self.lambda as f32,
            self.vf_coeff,
            self.entropy_coeff,
            self.grad_clip,
            self.lr,
            self.vf_clip,
            self.kl_target,
            self.kl_coeff,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("trainer coefficients must be finite".into()));
        }
        if self.clip_param.is_nan() || self.clip_param < 0.0 {
            return Err(Error::Config("clip_param must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in [0, 1]".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.sgd_iters == 0 {
            return Err(Error::Config("batch size, minibatch size and sgd_iters must be positive".into()));
        }
        if self.batch_size < self.minibatch_size {
            return Err(Error::Config(format!(
                "batch_size {} is smaller than minibatch_size {}",
                self.batch_size, self.minibatch_size
            )));
        }
        Ok(())
    }
}
