//! Trains black-box and white-box latent adversaries against the frozen
//! TinyLM and compares them on held-out prompts.
//!
//! cargo run --release --example latent_attack_tinylm -- lmattack.seeds=3 lmattack.episodes=4000 lmattack.eval_interval=1000

use advpol::harness::{Config, SeedTree};
use advpol::lmattack::{study, Arm, LmAttackConfig};

fn main() -> advpol::Result<()> {
    let mut c = Config::new();
    c.set("experiment.kind", "lmattack");
    c.set("experiment.seed", 7);
    for kv in std::env::args().skip(1) {
        c.apply_override(&kv)?;
    }
    c.materialize(&LmAttackConfig::schema())?;
    let cfg = LmAttackConfig::from_config(&c)?;
    let t = std::time::Instant::now();
    let st = study(&cfg, SeedTree::new(c.seed()?))?;
    println!("tinylm {}  base rate {:.4}", &st.model_hash[..12], st.base_rate);
    for (arm, points) in &st.curves {
        let line: Vec<String> = points.iter().map(|p| format!("{:.3}", p.mean)).collect();
        println!("{arm:>9}: {}", line.join(" "));
    }
    for (label, step, w) in &st.tests {
        match w {
            Some(w) => println!("white_box > black_box at {label} ({step}): t {:.3} p {:.4}", w.t, w.p),
            None => println!("white_box > black_box at {label} ({step}): not testable"),
        }
    }
    for arm in [Arm::BlackBox, Arm::WhiteBox] {
        let v = st.values_at(arm, cfg.episodes);
        if !v.is_empty() {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            println!("{arm}: final mean {m:.4} = {:.1}x base", m / st.base_rate);
        }
    }
    if let Some((_, r)) = st.runs.iter().find(|(_, r)| r.arm == Arm::WhiteBox) {
        if let Some(e) = r.final_episodes.first() {
            println!("sample: {} -> {}", advpol::lmattack::detokenize(&e.prompt), advpol::lmattack::detokenize(&e.completion));
        }
    }
    eprintln!("{:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
