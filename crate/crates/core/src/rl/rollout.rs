use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;

use super::policy::{PolicyModel, PolicyStep};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::memory::Observation;

/// One episode (or the truncated tail of one) as seen by the behavior
/// policy. `observations[t]` is the input that produced `actions[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode_id: u64,
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f32>,
    /// Full behavior log-distribution per step, used by the KL penalty.
    pub behavior_log_probs: Vec<Vec<f32>>,
    pub values: Vec<f32>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
    /// Value of the state after the last step; zero after a true terminal.
    pub bootstrap_value: f32,
}

impl Trajectory {
    fn new(episode_id: u64) -> Self {
        Self {
            episode_id,
            observations: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            behavior_log_probs: Vec::new(),
            values: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            bootstrap_value: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Whether the episode reached a terminal state inside this trajectory.
    pub fn is_complete(&self) -> bool {
        self.dones.last().copied().unwrap_or(false)
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().map(|&r| f64::from(r)).sum()
    }

    /// Checks that all per-step lists agree in length and only the last step
    /// may be terminal.
    pub fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        let lens = [
            self.observations.len(),
            self.log_probs.len(),
            self.behavior_log_probs.len(),
            self.values.len(),
            self.rewards.len(),
            self.dones.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Contract(format!("trajectory lists disagree: {} actions vs {:?}", n, lens)));
        }
        if self.dones.iter().take(n.saturating_sub(1)).any(|&d| d) {
            return Err(Error::Contract("terminal step in the middle of a trajectory".into()));
        }
        Ok(())
    }
}

/// Samples an action from log-probabilities.
pub fn sample_action(log_probs: &[f32], rng: &mut dyn RngCore) -> Result<usize> {
    let probs: Vec<f64> = log_probs.iter().map(|&l| f64::from(l).exp()).collect();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::Domain {
        op: "sample_action",
        detail: e.to_string(),
    })?;
    Ok(dist.sample(rng))
}

pub fn greedy_action(log_probs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &l) in log_probs.iter().enumerate() {
        if l > log_probs[best] {
            best = i;
        }
    }
    best
}

/// Runs the policy for exactly `total_steps` environment steps. Each
/// episode starts from a fresh reset and the initial memory state. When the
/// step budget cuts an episode short its tail is bootstrapped with the value
/// of the next observation.
pub fn collect_rollouts(
    model: &PolicyModel,
    env: &mut dyn Environment,
    total_steps: usize,
    first_episode_id: u64,
    rng: &mut dyn RngCore,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    let mut steps = 0;
    let mut episode_id = first_episode_id;
    while steps < total_steps {
        let mut traj = Trajectory::new(episode_id);
        episode_id += 1;
        let mut obs = env.reset().observation;
        let mut state = model.initial_state();
        loop {
            let (PolicyStep { log_probs, value, .. }, next_state) = model.step(&obs, state)?;
            state = next_state;
            let action = sample_action(&log_probs, rng)?;
            let r = env.step(action)?;
            traj.observations.push(obs);
            traj.actions.push(action);
            traj.log_probs.push(log_probs[action]);
            traj.behavior_log_probs.push(log_probs);
            traj.values.push(value);
            traj.rewards.push(r.reward);
            traj.dones.push(r.done);
            obs = r.observation;
            steps += 1;
            if r.done {
                break;
            }
            if steps == total_steps {
                let (tail, _) = model.step(&obs, state)?;
                traj.bootstrap_value = tail.value;
                break;
            }
        }
        out.push(traj);
    }
    Ok(out)
}

/// Per-step advantages and value targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Generalized advantage estimation within one trajectory.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Advantages {
    let n = traj.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if traj.dones[t] {
            0.0
        } else if t + 1 < n {
            f64::from(traj.values[t + 1])
        } else {
            f64::from(traj.bootstrap_value)
        };
        let carry = if traj.dones[t] { 0.0 } else { running };
        let delta = f64::from(traj.rewards[t]) + gamma * next_value - f64::from(traj.values[t]);
        running = delta + gamma * lambda * carry;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(&traj.values).map(|(a, &v)| a + f64::from(v)).collect();
    Advantages { advantages, returns }
}
