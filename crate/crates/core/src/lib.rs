//! Graph convolutional memory (GCM) for partially observable reinforcement
//! learning.
//!
//! The crate bundles everything needed to train and compare memory modules
//! on partially observable tasks:
//!
//! - [`tensor`]: a small dense tensor engine with reverse-mode autodiff.
//! - [`gcm`]: the knowledge-graph memory, its topological priors and the
//!   graph convolution stack.
//! - [`baselines`]: MLP and LSTM memory modules behind the same interface.
//! - [`env`]: partially observable cartpole and the memory card game.
//! - [`rl`]: actor-critic policy, rollouts, GAE, PPO and A2C.
//! - [`harness`]: declarative experiment configs, seeded runs, CSV metrics.

pub mod baselines;
pub mod env;
pub mod error;
pub mod gcm;
pub mod harness;
pub mod memory;
pub mod rl;
pub mod tensor;

pub use error::{Error, Result};
