//! Partially observable environments behind a uniform reset/step interface.

mod cardgame;
mod cartpole;

pub use cardgame::{CardAction, CardGame, CardGameState};
pub use cartpole::{CartPole, CartpoleState};

use crate::error::{Error, Result};
use crate::memory::Observation;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f32,
    pub done: bool,
}

pub trait Environment {
    /// Starts a new episode.
    fn reset(&mut self) -> StepResult;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    fn num_actions(&self) -> usize;

    fn obs_dim(&self) -> usize;
}

/// Declarative description of an environment; builds seeded instances.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Cartpole,
    CardGame { cards: usize, episode_limit: usize },
}

impl EnvSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Cartpole => Box::new(CartPole::new(seed)),
            EnvSpec::CardGame { cards, episode_limit } => Box::new(CardGame::new(*cards, *episode_limit, seed)?),
        })
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            EnvSpec::Cartpole => cartpole::OBS_DIM,
            EnvSpec::CardGame { cards, .. } => cardgame::obs_dim(*cards),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            EnvSpec::Cartpole => 2,
            EnvSpec::CardGame { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Cartpole => Ok(()),
            EnvSpec::CardGame { cards, episode_limit } => {
                if *cards < 2 || cards % 2 != 0 {
                    return Err(Error::Config(format!("card count must be even and at least 2, got {}", cards)));
                }
                if *episode_limit == 0 {
                    return Err(Error::Config("episode limit must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// Episode length used for the published card counts.
pub fn default_card_episode_limit(cards: usize) -> Option<usize> {
    match cards {
        16 => Some(50),
        20 => Some(75),
        24 => Some(100),
        _ => None,
    }
}
