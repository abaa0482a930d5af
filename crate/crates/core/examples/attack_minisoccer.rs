//! Pretrains a MiniSoccer target, then trains adversaries against it with
//! and without introspection and prints the evaluation curves (net points
//! per episode, adversary minus target).
//!
//! cargo run --release --example attack_minisoccer -- attack2p.targets=1 attack2p.seeds=1 attack2p.steps=100000 attack2p.eval_interval=20000

use advpol::attack2p::{compare_modes, pretrain_pool, Attack2pConfig};
use advpol::harness::{Config, SeedTree};

fn main() -> advpol::Result<()> {
    let mut c = Config::new();
    c.set("experiment.kind", "attack2p");
    c.set("experiment.seed", 3);
    for kv in std::env::args().skip(1) {
        c.apply_override(&kv)?;
    }
    c.materialize(&Attack2pConfig::schema())?;
    let cfg = Attack2pConfig::from_config(&c)?;
    let root = SeedTree::new(c.seed()?).child("attack2p", 0);
    let clock = std::time::Instant::now();

    let pool = pretrain_pool(&cfg, root)?;
    for t in &pool {
        let p = &t.provenance;
        let last = t.metrics.last().map_or(f64::NAN, |m| m.mean_ep_reward);
        println!(
            "target seed {:016x}: gate {:+.2} net points over {} episodes{}; last self-play return {last:.2}",
            p.seed,
            p.gate_net_points,
            p.gate_episodes,
            if p.flagged { " (flagged)" } else { "" }
        );
    }
    eprintln!("pretraining {:.0}s", clock.elapsed().as_secs_f64());
    let targets: Vec<_> = pool.into_iter().filter(|t| !t.provenance.flagged).map(|t| t.net).collect();
    if targets.is_empty() {
        println!("no target passed the competence gate");
        return Ok(());
    }

    let cmp = compare_modes(&targets, &cfg, root)?;
    for (mode, points) in &cmp.curves {
        let line: Vec<String> = points.iter().map(|p| format!("{:+.2}", p.mean)).collect();
        println!("{:>13}: {}", mode.name(), line.join(" "));
    }
    for t in &cmp.tests {
        let p = t.welch.map_or(f64::NAN, |w| w.p);
        println!(
            "{} vs blackbox ({} @ {}): {:+.3} vs {:+.3}, p {p:.4}",
            t.mode, t.checkpoint, t.env_steps, t.mean_mode, t.mean_baseline
        );
    }
    eprintln!("total {:.0}s", clock.elapsed().as_secs_f64());
    Ok(())
}
