use rand::seq::SliceRandom;
use rand::RngCore;

use super::loss::{a2c_loss, ppo_loss, LossInputs, PpoCoefficients};
use super::policy::PolicyModel;
use super::rollout::{compute_gae, Trajectory};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::memory::{EpisodeInput, MemoryModule};
use crate::tensor::{OptimizerKind, OptimizerSettings, Tape};

/// A trajectory turned into tape-ready inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEpisode {
    pub input: EpisodeInput,
    pub targets: LossInputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedBatch {
    pub episodes: Vec<PreparedEpisode>,
}

impl PreparedBatch {
    pub fn steps(&self) -> usize {
        self.episodes.iter().map(|e| e.input.len).sum()
    }
}

/// Scalars averaged over the minibatches of the final SGD pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    /// Pre-clip global gradient norm.
    pub grad_norm: f64,
    /// KL penalty coefficient after adaptation.
    pub kl_coeff: f32,
}

/// Runs GAE on every trajectory and builds per-episode loss inputs.
/// Advantages are standardized over the whole batch when requested.
pub fn prepare_batch(model: &PolicyModel, trajectories: &[Trajectory], config: &TrainConfig) -> Result<PreparedBatch> {
    if trajectories.iter().all(|t| t.is_empty()) {
        return Err(Error::Contract("update called with an empty batch".into()));
    }
    let mut gae = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        t.validate()?;
        gae.push(compute_gae(t, config.gamma, config.lambda));
    }
    let (mean, std) = if config.normalize_advantages {
        let all: Vec<f64> = gae.iter().flat_map(|g| g.advantages.iter().copied()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt() + 1e-8)
    } else {
        (0.0, 1.0)
    };
    let mut episodes = Vec::with_capacity(trajectories.len());
    for (t, g) in trajectories.iter().zip(&gae) {
        if t.is_empty() {
            continue;
        }
        let input = model.memory.prepare_episode(&t.observations)?;
        let targets = LossInputs {
            actions: t.actions.clone(),
            old_log_probs: t.log_probs.clone(),
            behavior_log_probs: t.behavior_log_probs.concat(),
            old_values: t.values.clone(),
            advantages: g.advantages.iter().map(|a| ((a - mean) / std) as f32).collect(),
            returns: g.returns.iter().map(|&r| r as f32).collect(),
        };
        episodes.push(PreparedEpisode { input, targets });
    }
    Ok(PreparedBatch { episodes })
}

/// Groups episodes, in the given order, into minibatches of whole episodes
/// whose step counts land as close to `target` as possible. Every group holds
/// at least one episode.
pub fn pack_minibatches(order: &[usize], lengths: &[usize], target: usize) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut steps = 0usize;
    for &i in order {
        let len = lengths[i];
        if !current.is_empty() {
            let keep = (steps + len).abs_diff(target) < steps.abs_diff(target);
            if !keep {
                groups.push(std::mem::take(&mut current));
                steps = 0;
            }
        }
        current.push(i);
        steps += len;
    }
    if !current.is_empty() {
        groups.push(current);
    }
    groups
}

/// Doubles the coefficient when the measured KL overshoots twice the target
/// and halves it when it falls under half the target.
pub fn adapt_kl_coeff(coeff: f32, kl: f64, target: f32) -> f32 {
    let target = f64::from(target);
    if kl > 2.0 * target {
        coeff * 2.0
    } else if kl < 0.5 * target {
        coeff * 0.5
    } else {
        coeff
    }
}

fn optimizer(config: &TrainConfig) -> OptimizerSettings {
    OptimizerSettings {
        kind: OptimizerKind::adam(),
        lr: config.lr,
        clip_norm: Some(config.grad_clip),
    }
}

fn gather<'a>(batch: &'a PreparedBatch, group: &[usize]) -> (Vec<&'a EpisodeInput>, LossInputs) {
    let mut inputs = LossInputs::default();
    let mut eps = Vec::with_capacity(group.len());
    for &i in group {
        eps.push(&batch.episodes[i].input);
        inputs.extend(&batch.episodes[i].targets);
    }
    (eps, inputs)
}

/// PPO update: `sgd_iters` passes over shuffled whole-episode minibatches,
/// each minibatch replaying its episodes from the initial memory state.
pub fn ppo_update(
    model: &mut PolicyModel,
    batch: &PreparedBatch,
    config: &TrainConfig,
    kl_coeff: f32,
    rng: &mut dyn RngCore,
) -> Result<UpdateMetrics> {
    if batch.steps() == 0 {
        return Err(Error::Contract("update called with an empty batch".into()));
    }
    let settings = optimizer(config);
    let lengths: Vec<usize> = batch.episodes.iter().map(|e| e.input.len).collect();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    let mut tape = Tape::new();
    let mut metrics = UpdateMetrics::default();
    for _ in 0..config.sgd_iters {
        order.shuffle(rng);
        let groups = pack_minibatches(&order, &lengths, config.minibatch_size);
        let mut sums = [0.0f64; 5];
        for group in &groups {
            tape.clear();
            let (eps, inputs) = gather(batch, group);
            let (logits, values) = model.forward_batch(&mut tape, &eps)?;
            let coeffs = PpoCoefficients {
                clip: config.clip_param,
                vf_clip: config.vf_clip,
                vf_coeff: config.vf_coeff,
                entropy_coeff: config.entropy_coeff,
                kl_coeff,
            };
            let terms = ppo_loss(&mut tape, logits, values, &inputs, &coeffs)?;
            tape.backward(terms.total)?;
            model.params.accumulate_grads(&tape)?;
            let norm = model.params.step(&settings);
            if !norm.is_finite() {
                return Err(Error::NonFinite { op: "gradient" });
            }
            for (s, v) in sums.iter_mut().zip([
                tape.scalar_value(terms.policy),
                tape.scalar_value(terms.value),
                tape.scalar_value(terms.entropy),
                tape.scalar_value(terms.kl),
                norm,
            ]) {
                *s += f64::from(v);
            }
        }
        let g = groups.len() as f64;
        metrics = UpdateMetrics {
            policy_loss: sums[0] / g,
            value_loss: sums[1] / g,
            entropy: sums[2] / g,
            kl: sums[3] / g,
            grad_norm: sums[4] / g,
            kl_coeff,
        };
    }
    metrics.kl_coeff = adapt_kl_coeff(kl_coeff, metrics.kl, config.kl_target);
    Ok(metrics)
}

/// One synchronous A2C gradient step over the whole batch.
pub fn a2c_update(model: &mut PolicyModel, batch: &PreparedBatch, config: &TrainConfig) -> Result<UpdateMetrics> {
    if batch.steps() == 0 {
        return Err(Error::Contract("update called with an empty batch".into()));
    }
    let all: Vec<usize> = (0..batch.episodes.len()).collect();
    let (eps, inputs) = gather(batch, &all);
    let mut tape = Tape::new();
    let (logits, values) = model.forward_batch(&mut tape, &eps)?;
    let terms = a2c_loss(&mut tape, logits, values, &inputs, config.vf_coeff, config.entropy_coeff)?;
    tape.backward(terms.total)?;
    model.params.accumulate_grads(&tape)?;
    let norm = model.params.step(&optimizer(config));
    if !norm.is_finite() {
        return Err(Error::NonFinite { op: "gradient" });
    }
    Ok(UpdateMetrics {
        policy_loss: f64::from(tape.scalar_value(terms.policy)),
        value_loss: f64::from(tape.scalar_value(terms.value)),
        entropy: f64::from(tape.scalar_value(terms.entropy)),
        kl: f64::from(tape.scalar_value(terms.kl)),
        grad_norm: f64::from(norm),
        kl_coeff: 0.0,
    })
}
