//! PPO on a two-armed bandit: arm 1 pays 1, arm 0 pays 0.

use advpol::policy::{ForwardRecord, HeadKind, PolicyNet, PolicySpec};
use advpol::ppo::{PpoConfig, PpoTrainer, RolloutSource, Transition};
use advpol::Rng64;
use rand::SeedableRng;

struct Bandit;

impl RolloutSource for Bandit {
    fn observation(&mut self) -> advpol::Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    fn step(&mut self, record: &ForwardRecord) -> advpol::Result<Transition> {
        Ok(Transition {
            reward: if record.action.discrete() == 1 { 1.0 } else { 0.0 },
            done: true,
        })
    }
}

fn main() -> advpol::Result<()> {
    let mut rng = Rng64::seed_from_u64(0);
    let net = PolicyNet::new(&PolicySpec::new(1, 8, HeadKind::Categorical(2)), &mut rng)?;
    let cfg = PpoConfig {
        steps_per_iter: 64,
        minibatch_size: 32,
        lr: 3e-3,
        ..PpoConfig::default()
    };
    let mut trainer = PpoTrainer::new(net, cfg)?;
    for it in 1..=100 {
        let m = trainer.train_iteration(&mut Bandit, &mut rng)?;
        if it % 20 == 0 {
            let p = trainer.net.evaluate(&[1.0])?.dist.summary()[1];
            println!("iteration {it:>3}: mean reward {:.3}, P(arm 1) {p:.3}", m.mean_ep_reward);
        }
    }
    Ok(())
}
