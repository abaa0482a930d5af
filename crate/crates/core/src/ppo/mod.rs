//! Proximal Policy Optimization with generalized advantage estimation.
//!
//! [`PpoTrainer`] drives any [`RolloutSource`]: the source owns the
//! environment (and whatever frozen opponents or introspection it needs) and
//! turns the learner's [`ForwardRecord`](crate::policy::ForwardRecord) into a
//! reward and a done flag.

mod loss;
mod trainer;

pub use loss::{ppo_loss, ppo_loss_on, LossParts};
pub use trainer::{write_metrics_csv, IterationMetrics, PpoTrainer, RolloutSource, Transition, METRICS_HEADER};

use crate::numkit::Matrix;
use crate::policy::Action;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub value_coef: f64,
    /// Signed: positive rewards entropy, negative penalizes it.
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub steps_per_iter: usize,
    /// Global gradient-norm clip; 0 disables.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            epochs: 4,
            minibatch_size: 256,
            lr: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            steps_per_iter: 2048,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("ppo: {m}")));
        if self.clip_eps.is_nan() || self.clip_eps <= 0.0 {
            return bad("clip epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.steps_per_iter == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return bad("steps, minibatch size and epochs must be positive");
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.max_grad_norm < 0.0 || !self.entropy_coef.is_finite() {
            return bad("lr must be positive, grad clip non-negative, entropy coefficient finite");
        }
        Ok(())
    }
}

/// On-policy transitions plus advantages and return targets.
#[derive(Clone, Debug)]
pub struct RolloutBatch {
    pub obs: Matrix,
    pub actions: Vec<Action>,
    pub logp_old: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fills `advantages` and `returns` from the stored rewards and values.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let (a, r) = compute_gae(&self.rewards, &self.values, &self.dones, self.bootstrap_value, gamma, lambda);
        self.advantages = a;
        self.returns = r;
    }
}

/// Reverse GAE recursion; no bootstrapping across `done`.
///
/// `A_t = δ_t + γλ(1−done_t)A_{t+1}`, `δ_t = r_t + γ(1−done_t)V_{t+1} − V_t`,
/// with `V_T = bootstrap_value`. Returns `(advantages, advantages + values)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len(), "compute_gae: rewards/values length");
    assert_eq!(rewards.len(), dones.len(), "compute_gae: rewards/dones length");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shifts to mean 0 and scales to std 1; left centered only when std < 1e-8.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-8 {
        adv.iter().map(|a| a - mean).collect()
    } else {
        adv.iter().map(|a| (a - mean) / std).collect()
    }
}
