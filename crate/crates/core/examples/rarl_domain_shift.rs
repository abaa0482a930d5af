//! Trains runner policies with and without action adversaries, keeps the
//! better half of each condition and evaluates them on a grid of shifted
//! friction and mass.
//!
//! cargo run --release --example rarl_domain_shift -- rarl.agents=4 rarl.steps=40000

use advpol::harness::{Config, SeedTree};
use advpol::rarl::{rarl_study, RarlCondition, RarlConfig};

fn main() -> advpol::Result<()> {
    let mut c = Config::new();
    c.set("experiment.kind", "rarl");
    c.set("experiment.seed", 5);
    c.set("rarl.agents", 4);
    c.set("rarl.steps", 40_000);
    for kv in std::env::args().skip(1) {
        c.apply_override(&kv)?;
    }
    c.materialize(&RarlConfig::schema())?;
    let cfg = RarlConfig::from_config(&c)?;
    let clock = std::time::Instant::now();
    let st = rarl_study(&cfg, SeedTree::new(c.seed()?).child("rarl", 0))?;
    for &cond in &cfg.conditions {
        let finals: Vec<String> = st
            .agents
            .iter()
            .filter(|a| a.condition == cond)
            .map(|a| format!("{:.1}{}", a.final_eval, if a.selected { "*" } else { "" }))
            .collect();
        let gm = st.grid_means(cond);
        println!(
            "{:>10}: nominal finals [{}], selected grid mean {:.2}",
            cond.name(),
            finals.join(" "),
            gm.iter().sum::<f64>() / gm.len() as f64
        );
    }
    println!("corner cells (friction, mass): fraction of selected agents at or above the control mean");
    for cond in [RarlCondition::Rarl, RarlCondition::WbRarl] {
        if cfg.conditions.contains(&cond) {
            let fr: Vec<String> = st
                .corner_fractions(cond)
                .iter()
                .map(|((f, m), x)| format!("({f:.1},{m:.1}) {x:.2}"))
                .collect();
            println!("{:>10}: {}", cond.name(), fr.join("  "));
        }
    }
    for (name, w) in &st.tests {
        println!("{name}: p {}", w.map_or("n/a".to_string(), |w| format!("{:.4}", w.p)));
    }
    eprintln!("{:.0}s", clock.elapsed().as_secs_f64());
    Ok(())
}
