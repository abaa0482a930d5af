use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{normalize_advantages, ppo_loss_on, LossParts, PpoConfig, RolloutBatch};
use crate::numkit::{AdamConfig, AdamState, Matrix};
use crate::policy::{ForwardRecord, PolicyNet};
use crate::{Error, Result};

/// Result of applying the learner's action to an environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: bool,
}

/// An environment as seen by the learner.
///
/// `observation` must return the same vector until `step` is called; after a
/// terminal step the source resets itself, so the next observation starts a
/// fresh episode.
pub trait RolloutSource {
    fn observation(&mut self) -> Result<Vec<f64>>;
    fn step(&mut self, record: &ForwardRecord) -> Result<Transition>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub env_steps: u64,
    /// Mean return of episodes completed during this iteration (NaN if none).
    pub mean_ep_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub const METRICS_HEADER: &str = "iteration,env_steps,mean_ep_reward,policy_loss,value_loss,entropy";

pub fn write_metrics_csv(path: &Path, rows: &[IterationMetrics]) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.iteration, m.env_steps, m.mean_ep_reward, m.policy_loss, m.value_loss, m.entropy
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Owns a policy and its optimizer state; episodes may span iterations.
#[derive(Clone, Debug)]
pub struct PpoTrainer {
    pub net: PolicyNet,
    pub cfg: PpoConfig,
    adam: AdamState,
    iteration: u64,
    env_steps: u64,
    partial_return: f64,
}

impl PpoTrainer {
    pub fn new(net: PolicyNet, cfg: PpoConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = AdamState::new(
            AdamConfig {
                lr: cfg.lr,
                ..Default::default()
            },
            &net,
        );
        Ok(Self {
            net,
            cfg,
            adam,
            iteration: 0,
            env_steps: 0,
            partial_return: 0.0,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Runs `steps_per_iter` stochastic steps; returns the batch (advantages
    /// filled, not yet normalized) and the returns of episodes that finished.
    pub fn collect<S: RolloutSource + ?Sized, R: Rng + ?Sized>(
        &mut self,
        source: &mut S,
        rng: &mut R,
    ) -> Result<(RolloutBatch, Vec<f64>)> {
        let n = self.cfg.steps_per_iter;
        let d = self.net.input_dim();
        let mut obs = Vec::with_capacity(n * d);
        let mut batch = RolloutBatch {
            obs: Matrix::zeros(0, d),
            actions: Vec::with_capacity(n),
            logp_old: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap_value: 0.0,
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        let mut finished = Vec::new();
        for _ in 0..n {
            let o = source.observation()?;
            let rec = self.net.forward(&o, rng)?;
            let tr = source.step(&rec)?;
            if !tr.reward.is_finite() {
                return Err(Error::NonFinite(format!("reward at env step {}", self.env_steps)));
            }
            obs.extend_from_slice(&o);
            batch.values.push(rec.value);
            batch.logp_old.push(rec.logp);
            batch.actions.push(rec.action);
            batch.rewards.push(tr.reward);
            batch.dones.push(tr.done);
            self.partial_return += tr.reward;
            self.env_steps += 1;
            if tr.done {
                finished.push(self.partial_return);
                self.partial_return = 0.0;
            }
        }
        batch.obs = Matrix::from_vec(n, d, obs)?;
        batch.bootstrap_value = if batch.dones.last() == Some(&true) {
            0.0
        } else {
            self.net.evaluate(&source.observation()?)?.value
        };
        batch.compute_advantages(self.cfg.gamma, self.cfg.lambda);
        Ok((batch, finished))
    }

    /// Normalizes advantages, then runs the configured epochs of minibatch
    /// Adam. Returns the loss parts averaged over every minibatch.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &mut RolloutBatch, rng: &mut R) -> Result<LossParts> {
        batch.advantages = normalize_advantages(&batch.advantages);
        self.adam.config.lr = self.cfg.lr;
        let mut idx: Vec<usize> = (0..batch.len()).collect();
        let mut sum = LossParts::default();
        let mut count = 0.0;
        for _ in 0..self.cfg.epochs {
            idx.shuffle(rng);
            for mb in idx.chunks(self.cfg.minibatch_size) {
                let (parts, mut grads) = ppo_loss_on(&self.net, batch, mb, &self.cfg)?;
                if self.cfg.max_grad_norm > 0.0 {
                    let norm = grads.l2_norm();
                    if norm > self.cfg.max_grad_norm {
                        grads.scale(self.cfg.max_grad_norm / norm);
                    }
                }
                self.adam.step(&mut self.net, &grads)?;
                sum.total += parts.total;
                sum.policy += parts.policy;
                sum.value += parts.value;
                sum.entropy += parts.entropy;
                sum.clip_fraction += parts.clip_fraction;
                sum.approx_kl += parts.approx_kl;
                count += 1.0;
            }
        }
        Ok(LossParts {
            total: sum.total / count,
            policy: sum.policy / count,
            value: sum.value / count,
            entropy: sum.entropy / count,
            clip_fraction: sum.clip_fraction / count,
            approx_kl: sum.approx_kl / count,
        })
    }

    /// One collect + update cycle.
    pub fn train_iteration<S: RolloutSource + ?Sized, R: Rng + ?Sized>(
        &mut self,
        source: &mut S,
        rng: &mut R,
    ) -> Result<IterationMetrics> {
        let (mut batch, finished) = self.collect(source, rng)?;
        let parts = self.update(&mut batch, rng)?;
        self.iteration += 1;
        let mean_ep_reward = if finished.is_empty() {
            f64::NAN
        } else {
            finished.iter().sum::<f64>() / finished.len() as f64
        };
        Ok(IterationMetrics {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_ep_reward,
            policy_loss: parts.policy,
            value_loss: parts.value,
            entropy: parts.entropy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{HeadKind, PolicySpec};
    use crate::Rng64;
    use rand::SeedableRng;

    /// Contextless two-armed bandit paying 1 for arm 1.
    struct Bandit;

    impl RolloutSource for Bandit {
        fn observation(&mut self) -> Result<Vec<f64>> {
            Ok(vec![1.0])
        }

        fn step(&mut self, record: &ForwardRecord) -> Result<Transition> {
            Ok(Transition {
                reward: if record.action.discrete() == 1 { 1.0 } else { 0.0 },
                done: true,
            })
        }
    }

    #[test]
    fn learns_a_trivial_bandit() {
        let mut rng = Rng64::seed_from_u64(5);
        let net = PolicyNet::new(&PolicySpec::new(1, 8, HeadKind::Categorical(2)), &mut rng).unwrap();
        let cfg = PpoConfig {
            steps_per_iter: 64,
            minibatch_size: 32,
            lr: 3e-3,
            ..Default::default()
        };
        let mut t = PpoTrainer::new(net, cfg).unwrap();
        let mut last = 0.0;
        for _ in 0..60 {
            last = t.train_iteration(&mut Bandit, &mut rng).unwrap().mean_ep_reward;
        }
        assert!(last > 0.9, "mean reward {last}");
        assert_eq!(t.env_steps(), 60 * 64);
    }

    #[test]
    fn same_seed_same_parameters() {
        let run = || {
            let mut rng = Rng64::seed_from_u64(11);
            let net = PolicyNet::new(&PolicySpec::new(1, 4, HeadKind::Categorical(2)), &mut rng).unwrap();
            let cfg = PpoConfig {
                steps_per_iter: 32,
                minibatch_size: 8,
                ..Default::default()
            };
            let mut t = PpoTrainer::new(net, cfg).unwrap();
            for _ in 0..3 {
                t.train_iteration(&mut Bandit, &mut rng).unwrap();
            }
            t.net
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn metrics_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let row = IterationMetrics {
            iteration: 1,
            env_steps: 64,
            mean_ep_reward: 0.5,
            policy_loss: -0.1,
            value_loss: 0.2,
            entropy: 0.69,
        };
        write_metrics_csv(&p, &[row]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{METRICS_HEADER}\n1,64,0.5,-0.1,0.2,0.69\n"));
    }
}
