//! Cartpole where only the cart position and pole angle are observed.
//!
//! Dynamics follow the classic cart-pole equations with explicit Euler
//! integration; positions are advanced with the pre-update velocities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, StepResult};
use crate::error::{Error, Result};
use crate::memory::Observation;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_POLE_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const MAX_STEPS: usize = 200;
pub(super) const OBS_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
}

impl CartpoleState {
    pub fn is_terminal(&self) -> bool {
        self.x < -X_LIMIT
            || self.x > X_LIMIT
            || self.theta < -THETA_LIMIT
            || self.theta > THETA_LIMIT
            || self.steps >= MAX_STEPS
    }

    /// Advances the physics by one timestep under `force` newtons.
    pub fn integrate(&mut self, force: f64) {
        let total_mass = CART_MASS + POLE_MASS;
        let pole_mass_length = POLE_MASS * HALF_POLE_LENGTH;
        let (sin, cos) = self.theta.sin_cos();
        let temp = (force + pole_mass_length * self.theta_dot * self.theta_dot * sin) / total_mass;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (HALF_POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
        self.x += TAU * self.x_dot;
        self.x_dot += TAU * x_acc;
        self.theta += TAU * self.theta_dot;
        self.theta_dot += TAU * theta_acc;
    }

    /// Kinetic plus potential energy of the cart and a uniform rod pole.
    pub fn energy(&self) -> f64 {
        let l = HALF_POLE_LENGTH;
        let (sin, cos) = self.theta.sin_cos();
        let cart = 0.5 * CART_MASS * self.x_dot * self.x_dot;
        // pole centre of mass velocity
        let vx = self.x_dot + l * self.theta_dot * cos;
        let vy = -l * self.theta_dot * sin;
        let inertia = POLE_MASS * (2.0 * l) * (2.0 * l) / 12.0;
        let pole = 0.5 * POLE_MASS * (vx * vx + vy * vy) + 0.5 * inertia * self.theta_dot * self.theta_dot;
        cart + pole + POLE_MASS * GRAVITY * l * cos
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    rng: ChaCha8Rng,
    state: CartpoleState,
    done: bool,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        let mut env = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: CartpoleState {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0,
                steps: 0,
            },
            done: true,
        };
        env.reset();
        env
    }

    pub fn state(&self) -> &CartpoleState {
        &self.state
    }

    /// Overrides the full physical state, velocities included.
    #[doc(hidden)]
    pub fn set_state(&mut self, state: CartpoleState) {
        self.state = state;
        self.done = state.is_terminal();
    }

    fn observe(&self) -> Observation {
        Observation::new(vec![self.state.x as f32, self.state.theta as f32])
    }
}

impl Environment for CartPole {
    fn reset(&mut self) -> StepResult {
        let mut draw = || self.rng.random_range(-0.05..0.05);
        self.state = CartpoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
            steps: 0,
        };
        self.done = false;
        StepResult {
            observation: self.observe(),
            reward: 0.0,
            done: false,
        }
    }

    /// Action 0 pushes left, 1 pushes right.
    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Contract("cartpole stepped after the episode ended".into()));
        }
        let force = match action {
            0 => -FORCE,
            1 => FORCE,
            a => {
                return Err(Error::Index {
                    op: "cartpole action",
                    index: a,
                    extent: 2,
                })
            }
        };
        self.state.integrate(force);
        self.state.steps += 1;
        self.done = self.state.is_terminal();
        Ok(StepResult {
            observation: self.observe(),
            reward: 1.0,
            done: self.done,
        })
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }
}
