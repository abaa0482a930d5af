//! Checks the analytic PPO loss gradients of random small policies against
//! central finite differences, for both action heads.

use advpol::numkit::{finite_difference, max_relative_error, Matrix, Params};
use advpol::policy::{HeadKind, PolicyNet, PolicySpec};
use advpol::ppo::{ppo_loss, PpoConfig, RolloutBatch};
use advpol::Rng64;
use rand::{Rng, SeedableRng};

fn random_batch(net: &PolicyNet, n: usize, rng: &mut Rng64) -> advpol::Result<RolloutBatch> {
    let d = net.input_dim();
    let obs = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let mut actions = Vec::new();
    let mut logp_old = Vec::new();
    for r in 0..n {
        let rec = net.forward(obs.row(r), rng)?;
        actions.push(rec.action);
        // Off-policy shift so that some ratios land outside the clip range.
        logp_old.push(rec.logp + rng.random_range(-0.5..0.5));
    }
    Ok(RolloutBatch {
        obs,
        actions,
        logp_old,
        rewards: vec![0.0; n],
        values: vec![0.0; n],
        dones: vec![false; n],
        bootstrap_value: 0.0,
        advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    })
}

fn main() -> advpol::Result<()> {
    let cfg = PpoConfig {
        entropy_coef: 0.05,
        ..PpoConfig::default()
    };
    for (name, head) in [("categorical", HeadKind::Categorical(4)), ("gaussian", HeadKind::Gaussian(2))] {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = Rng64::seed_from_u64(seed);
            let net = PolicyNet::new(&PolicySpec::new(3, 5, head), &mut rng)?;
            let batch = random_batch(&net, 8, &mut rng)?;
            let (_, grads) = ppo_loss(&net, &batch, &cfg)?;
            let numeric = finite_difference(&net, 1e-6, |p| ppo_loss(p, &batch, &cfg).map_or(f64::NAN, |l| l.0.total));
            worst = worst.max(max_relative_error(&grads.segments().concat(), &numeric, 1e-3));
        }
        println!("{name:>11}: {} parameters, worst relative error over 20 nets {worst:.2e}", {
            let mut rng = Rng64::seed_from_u64(0);
            PolicyNet::new(&PolicySpec::new(3, 5, head), &mut rng)?.num_params()
        });
    }
    Ok(())
}
