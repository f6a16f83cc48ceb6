//! The memory card game ("concentration") read through a movable pointer.
//!
//! `n/2` pairs of cards lie face down in a row. The agent moves a pointer
//! left or right and flips the card under it. Two face-up unmatched cards are
//! compared: a match stays face up and pays `2/n`, a mismatch is turned back
//! over. Matching everything pays a total of one.
//!
//! Observation layout (all one-hot):
//!
//! | block              | width     | sentinel slot         |
//! |--------------------|-----------|-----------------------|
//! | pointer index      | `n`       |                       |
//! | pointer card value | `n/2 + 1` | `n/2` = face down     |
//! | last flipped index | `n + 1`   | `n` = nothing flipped |
//! | last flipped value | `n/2 + 1` | `n/2` = nothing       |
//! | previous action    | 4         | 3 = none              |
//!
//! Metadata fields `pointer_value` and `faceup_value` carry the value seen at
//! the pointer and the value of the pending face-up card, `None` when absent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Environment, StepResult};
use crate::error::{Error, Result};
use crate::memory::{Metadata, Observation};

pub const POINTER_VALUE: &str = "pointer_value";
pub const FACEUP_VALUE: &str = "faceup_value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardAction {
    Left,
    Right,
    Flip,
}

impl CardAction {
    pub fn from_index(a: usize) -> Result<Self> {
        match a {
            0 => Ok(CardAction::Left),
            1 => Ok(CardAction::Right),
            2 => Ok(CardAction::Flip),
            _ => Err(Error::Index {
                op: "card action",
                index: a,
                extent: 3,
            }),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub(super) fn obs_dim(n: usize) -> usize {
    n + (n / 2 + 1) + (n + 1) + (n / 2 + 1) + 4
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardGameState {
    pub values: Vec<usize>,
    pub face_up: Vec<bool>,
    pub matched: Vec<bool>,
    pub pointer: usize,
    /// The single face-up card still waiting for a partner.
    pub pending: Option<usize>,
    pub last_flipped: Option<usize>,
    /// Whether the most recent action revealed the card under the pointer.
    pub just_flipped: bool,
    pub prev_action: Option<CardAction>,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct CardGame {
    n: usize,
    episode_limit: usize,
    rng: ChaCha8Rng,
    state: CardGameState,
    done: bool,
}

impl CardGame {
    pub fn new(n: usize, episode_limit: usize, seed: u64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("card count must be even and at least 2, got {}", n)));
        }
        if episode_limit == 0 {
            return Err(Error::Config("episode limit must be positive".into()));
        }
        let mut game = Self {
            n,
            episode_limit,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: CardGameState {
                values: Vec::new(),
                face_up: Vec::new(),
                matched: Vec::new(),
                pointer: 0,
                pending: None,
                last_flipped: None,
                just_flipped: false,
                prev_action: None,
                steps: 0,
            },
            done: true,
        };
        game.reset();
        Ok(game)
    }

    pub fn state(&self) -> &CardGameState {
        &self.state
    }

    pub fn cards(&self) -> usize {
        self.n
    }

    pub fn matched_count(&self) -> usize {
        self.state.matched.iter().filter(|&&m| m).count()
    }

    fn observe(&self) -> Observation {
        let n = self.n;
        let pairs = n / 2;
        let s = &self.state;
        let mut f = vec![0.0f32; obs_dim(n)];
        f[s.pointer] = 1.0;
        let visible = s.face_up[s.pointer] || (s.just_flipped && s.last_flipped == Some(s.pointer));
        let pointer_value = visible.then(|| s.values[s.pointer]);
        let shown = if s.face_up[s.pointer] { s.values[s.pointer] } else { pairs };
        f[n + shown] = 1.0;
        let base = n + pairs + 1;
        f[base + s.last_flipped.unwrap_or(n)] = 1.0;
        let base = base + n + 1;
        f[base + s.last_flipped.map_or(pairs, |i| s.values[i])] = 1.0;
        let base = base + pairs + 1;
        f[base + s.prev_action.map_or(3, CardAction::index)] = 1.0;
        let meta = Metadata::default()
            .with_field(POINTER_VALUE, pointer_value.map(|v| v as i64))
            .with_field(FACEUP_VALUE, s.pending.map(|i| s.values[i] as i64));
        Observation { features: f, meta }
    }

    fn flip(&mut self) -> f32 {
        let s = &mut self.state;
        let p = s.pointer;
        if s.matched[p] || s.pending == Some(p) {
            return 0.0;
        }
        s.last_flipped = Some(p);
        s.just_flipped = true;
        match s.pending.take() {
            None => {
                s.face_up[p] = true;
                s.pending = Some(p);
                0.0
            }
            Some(q) if s.values[q] == s.values[p] => {
                s.matched[p] = true;
                s.matched[q] = true;
                s.face_up[p] = true;
                2.0 / self.n as f32
            }
            Some(q) => {
                s.face_up[q] = false;
                s.face_up[p] = false;
                0.0
            }
        }
    }
}

impl Environment for CardGame {
    fn reset(&mut self) -> StepResult {
        let n = self.n;
        let mut values: Vec<usize> = (0..n).map(|i| i / 2).collect();
        values.shuffle(&mut self.rng);
        self.state = CardGameState {
            values,
            face_up: vec![false; n],
            matched: vec![false; n],
            pointer: 0,
            pending: None,
            last_flipped: None,
            just_flipped: false,
            prev_action: None,
            steps: 0,
        };
        self.done = false;
        StepResult {
            observation: self.observe(),
            reward: 0.0,
            done: false,
        }
    }

    /// Actions: 0 left, 1 right, 2 flip.
    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Contract("card game stepped after the episode ended".into()));
        }
        let action = CardAction::from_index(action)?;
        self.state.just_flipped = false;
        let reward = match action {
            CardAction::Left => {
                self.state.pointer = self.state.pointer.saturating_sub(1);
                0.0
            }
            CardAction::Right => {
                self.state.pointer = (self.state.pointer + 1).min(self.n - 1);
                0.0
            }
            CardAction::Flip => self.flip(),
        };
        self.state.prev_action = Some(action);
        self.state.steps += 1;
        self.done = self.state.matched.iter().all(|&m| m) || self.state.steps >= self.episode_limit;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.done,
        })
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        obs_dim(self.n)
    }
}
