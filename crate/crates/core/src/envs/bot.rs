use rand::Rng;

use super::soccer::{Move, HEIGHT, WIDTH};

/// Probability of a uniformly random move.
pub const BOT_EPSILON: f64 = 0.1;

fn cell_of(obs_x: f64, obs_y: f64) -> (i32, i32) {
    let x = ((obs_x + 1.0) * f64::from(WIDTH - 1) / 2.0).round() as i32;
    let y = ((obs_y + 1.0) * f64::from(HEIGHT - 1) / 2.0).round() as i32;
    (x, y)
}

/// Greedy scripted opponent acting in its own frame.
///
/// Without the ball it steps toward the ball; with it, toward the centre of
/// the goal it attacks. It moves along the axis with the larger remaining
/// distance (horizontal on ties). With probability [`BOT_EPSILON`] it plays a
/// uniformly random move instead.
pub fn scripted_bot<R: Rng + ?Sized>(obs: &[f64], rng: &mut R) -> Move {
    if rng.random::<f64>() < BOT_EPSILON {
        return Move::ALL[rng.random_range(0..Move::ALL.len())];
    }
    let (x, y) = cell_of(obs[0], obs[1]);
    let possessing = obs[6] > 0.5;
    let (tx, ty) = if possessing {
        (WIDTH - 1, HEIGHT / 2)
    } else {
        cell_of(obs[4], obs[5])
    };
    let (dx, dy) = (tx - x, ty - y);
    if dx == 0 && dy == 0 {
        Move::Stay
    } else if dx.abs() >= dy.abs() {
        if dx > 0 {
            Move::Right
        } else {
            Move::Left
        }
    } else if dy > 0 {
        Move::Up
    } else {
        Move::Down
    }
}
