//! Reads the white-box vector `m_t` out of a policy in every introspection
//! mode and shows how it extends an adversary's observation.

use advpol::introspect::{extract_m, IntrospectionMode, Introspector};
use advpol::policy::{HeadKind, PolicyNet, PolicySpec};
use advpol::Rng64;
use rand::SeedableRng;

fn main() -> advpol::Result<()> {
    let mut rng = Rng64::seed_from_u64(11);
    let target = PolicyNet::new(&PolicySpec::new(12, 64, HeadKind::Categorical(5)), &mut rng)?;
    let obs = vec![0.1; 12];
    println!("target: {} inputs, {} latents, {} actions", target.input_dim(), target.latent_dim(), target.action_dim());
    for mode in IntrospectionMode::ALL {
        let m = extract_m(&target, &obs, mode)?;
        println!(
            "{:>13}: |m| = {:>2}  value {:?}  action {:>2}  latent {:>2}  adversary input {}",
            mode.name(),
            m.len(),
            m.value(),
            m.action().len(),
            m.latent().len(),
            obs.len() + m.len()
        );
    }

    // Running normalization while training, frozen afterwards.
    let mut intro = Introspector::new(IntrospectionMode::Full, &target, true);
    for i in 0..100 {
        let o: Vec<f64> = (0..12).map(|j| ((i * 7 + j) % 13) as f64 / 6.5 - 1.0).collect();
        let rec = target.forward(&o, &mut rng)?;
        intro.compose(&o, &rec)?;
    }
    intro.training = false;
    let rec = target.forward(&obs, &mut rng)?;
    let composed = intro.compose(&obs, &rec)?;
    println!("composed observation: {} entries, first m entry {:.3}", composed.len(), composed[12]);
    Ok(())
}
