//! Plays the scripted bot against itself and against a random mover, then
//! prints one episode's opening moves.

use advpol::envs::{scripted_bot, MiniSoccer, Move, Side, GOAL_REWARD};
use advpol::Rng64;
use rand::{Rng, SeedableRng};

fn play(episodes: u64, random_b: bool) -> advpol::Result<(f64, u32)> {
    let mut rng = Rng64::seed_from_u64(1);
    let mut total = 0.0;
    let mut goals = 0;
    for ep in 0..episodes {
        let mut env = MiniSoccer::new(ep);
        loop {
            let a = Side::A.to_world(scripted_bot(&env.observe(Side::A), &mut rng));
            let b = if random_b {
                Move::ALL[rng.random_range(0..5)]
            } else {
                Side::B.to_world(scripted_bot(&env.observe(Side::B), &mut rng))
            };
            let out = env.step(a, b)?;
            total += out.reward(Side::A);
            if out.reward(Side::A).abs() >= GOAL_REWARD {
                goals += 1;
            }
            if out.done {
                break;
            }
        }
    }
    Ok((total / episodes as f64, goals))
}

fn main() -> advpol::Result<()> {
    let (r, g) = play(200, false)?;
    println!("bot vs bot:    mean return for A {r:+.3}, {g} goals in 200 episodes");
    let (r, g) = play(200, true)?;
    println!("bot vs random: mean return for A {r:+.3}, {g} goals in 200 episodes");

    let mut env = MiniSoccer::new(5);
    let mut rng = Rng64::seed_from_u64(5);
    for _ in 0..6 {
        let a = Side::A.to_world(scripted_bot(&env.observe(Side::A), &mut rng));
        let b = Side::B.to_world(scripted_bot(&env.observe(Side::B), &mut rng));
        let out = env.step(a, b)?;
        let s = env.state();
        println!(
            "A {a:?} B {b:?} -> A at ({},{}), B at ({},{}), ball ({},{}), r_A {:+.1}",
            s.players[0].x, s.players[0].y, s.players[1].x, s.players[1].y, s.ball.x, s.ball.y, out.reward(Side::A)
        );
    }
    Ok(())
}
