//! Actor-critic objectives written against the tape.

use crate::error::{Error, Result};
use crate::tensor::{softmax_logits_ops, Reduction, Tape, Var};

/// Per-step constants a loss needs, flattened over the rows of a minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossInputs {
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f32>,
    /// Behavior log-distribution, `rows × actions` row-major.
    pub behavior_log_probs: Vec<f32>,
    pub old_values: Vec<f32>,
    pub advantages: Vec<f32>,
    pub returns: Vec<f32>,
}

impl LossInputs {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn extend(&mut self, other: &LossInputs) {
        self.actions.extend_from_slice(&other.actions);
        self.old_log_probs.extend_from_slice(&other.old_log_probs);
        self.behavior_log_probs.extend_from_slice(&other.behavior_log_probs);
        self.old_values.extend_from_slice(&other.old_values);
        self.advantages.extend_from_slice(&other.advantages);
        self.returns.extend_from_slice(&other.returns);
    }

    fn check(&self, tape: &Tape, logits: Var, values: Var) -> Result<usize> {
        let n = self.len();
        let ls = tape.shape(logits);
        if ls.len() != 2 || ls[0] != n || tape.shape(values) != [n] {
            return Err(Error::dim(
                "loss",
                format!("{} rows against logits {:?} and values {:?}", n, ls, tape.shape(values)),
            ));
        }
        if n == 0 {
            return Err(Error::Contract("loss over an empty batch".into()));
        }
        let a = ls[1];
        let lens = [
            self.old_log_probs.len(),
            self.old_values.len(),
            self.advantages.len(),
            self.returns.len(),
            self.behavior_log_probs.len() / a.max(1),
        ];
        if lens.iter().any(|&l| l != n) || self.behavior_log_probs.len() != n * a {
            return Err(Error::dim("loss", "loss inputs disagree in length"));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoCoefficients {
    /// Ratio clip ε; the ratio is clamped to `[1-ε, 1+ε]`.
    pub clip: f32,
    pub vf_clip: f32,
    pub vf_coeff: f32,
    pub entropy_coeff: f32,
    pub kl_coeff: f32,
}

/// Scalar loss terms; `total` is what gets differentiated.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
    pub kl: Var,
}

fn constant(tape: &mut Tape, data: &[f32]) -> Result<Var> {
    tape.constant(vec![data.len()], data.to_vec())
}

/// Mean `KL(behavior ‖ current)` per row.
fn kl_from_behavior(tape: &mut Tape, inputs: &LossInputs, log_probs: Var, a: usize) -> Result<Var> {
    let n = inputs.len();
    let p_old: Vec<f32> = inputs.behavior_log_probs.iter().map(|l| l.exp()).collect();
    let self_term: Vec<f32> = (0..n)
        .map(|i| {
            let mut s = 0.0f32;
            for j in i * a..(i + 1) * a {
                s += p_old[j] * inputs.behavior_log_probs[j];
            }
            s
        })
        .collect();
    let p_old = tape.constant(vec![n, a], p_old)?;
    let cross = tape.mul(p_old, log_probs)?;
    let cross = tape.reduce(Reduction::Sum, cross, 1)?;
    let self_term = constant(tape, &self_term)?;
    let kl_rows = tape.sub(self_term, cross)?;
    tape.mean(kl_rows)
}

/// Clipped-surrogate PPO objective with a clipped value loss, entropy bonus
/// and KL penalty.
pub fn ppo_loss(
    tape: &mut Tape,
    logits: Var,
    values: Var,
    inputs: &LossInputs,
    c: &PpoCoefficients,
) -> Result<LossTerms> {
    let a = inputs.check(tape, logits, values)?;
    let sm = softmax_logits_ops(tape, logits)?;
    let logp = tape.pick_cols(sm.log_probs, &inputs.actions)?;
    let old = constant(tape, &inputs.old_log_probs)?;
    let diff = tape.sub(logp, old)?;
    let ratio = tape.exp(diff)?;
    let adv = constant(tape, &inputs.advantages)?;
    let surr1 = tape.mul(ratio, adv)?;
    let clipped = tape.clamp(ratio, 1.0 - c.clip, 1.0 + c.clip)?;
    let surr2 = tape.mul(clipped, adv)?;
    let surr = tape.minimum(surr1, surr2)?;
    let surr = tape.mean(surr)?;
    let policy = tape.neg(surr)?;

    let returns = constant(tape, &inputs.returns)?;
    let old_v = constant(tape, &inputs.old_values)?;
    let err = tape.sub(values, returns)?;
    let err1 = tape.mul(err, err)?;
    let dv = tape.sub(values, old_v)?;
    let dv = tape.clamp(dv, -c.vf_clip, c.vf_clip)?;
    let v_clipped = tape.add(old_v, dv)?;
    let err = tape.sub(v_clipped, returns)?;
    let err2 = tape.mul(err, err)?;
    let verr = tape.maximum(err1, err2)?;
    let value = tape.mean(verr)?;

    let entropy = tape.mean(sm.entropy)?;
    let kl = kl_from_behavior(tape, inputs, sm.log_probs, a)?;

    let v_term = tape.scale(value, c.vf_coeff)?;
    let e_term = tape.scale(entropy, c.entropy_coeff)?;
    let k_term = tape.scale(kl, c.kl_coeff)?;
    let total = tape.add(policy, v_term)?;
    let total = tape.sub(total, e_term)?;
    let total = tape.add(total, k_term)?;
    Ok(LossTerms {
        total,
        policy,
        value,
        entropy,
        kl,
    })
}

/// Advantage actor-critic objective:
/// `-mean(log π(a|b)·A) + c_v·mean((V-R)²) - c_e·mean(H)`.
pub fn a2c_loss(
    tape: &mut Tape,
    logits: Var,
    values: Var,
    inputs: &LossInputs,
    vf_coeff: f32,
    entropy_coeff: f32,
) -> Result<LossTerms> {
    let a = inputs.check(tape, logits, values)?;
    let sm = softmax_logits_ops(tape, logits)?;
    let logp = tape.pick_cols(sm.log_probs, &inputs.actions)?;
    let adv = constant(tape, &inputs.advantages)?;
    let pg = tape.mul(logp, adv)?;
    let pg = tape.mean(pg)?;
    let policy = tape.neg(pg)?;
    let returns = constant(tape, &inputs.returns)?;
    let err = tape.sub(values, returns)?;
    let sq = tape.mul(err, err)?;
    let value = tape.mean(sq)?;
    let entropy = tape.mean(sm.entropy)?;
    let kl = kl_from_behavior(tape, inputs, sm.log_probs, a)?;
    let v_term = tape.scale(value, vf_coeff)?;
    let e_term = tape.scale(entropy, entropy_coeff)?;
    let total = tape.add(policy, v_term)?;
    let total = tape.sub(total, e_term)?;
    Ok(LossTerms {
        total,
        policy,
        value,
        entropy,
        kl,
    })
}
