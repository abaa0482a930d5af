//! One-on-one grid soccer.
//!
//! Player A attacks the right goal (column `WIDTH-1`), player B the left goal
//! (column 0). Moves resolve simultaneously. Whoever carries the ball into a
//! goal column scores for the side attacking that goal, so carrying it into
//! your own goal concedes. Rewards are always exactly zero-sum.

use rand::{Rng, SeedableRng};

use crate::{Error, Result, Rng64};

pub const WIDTH: i32 = 15;
pub const HEIGHT: i32 = 9;
pub const MAX_STEPS: u32 = 200;
pub const OBS_DIM: usize = 12;
pub const GOAL_REWARD: f64 = 1.0;
pub const SHAPING_REWARD: f64 = 0.1;
const STEAL_PROB: f64 = 0.5;

/// Kickoff cells for A, B and the ball.
pub const KICKOFF: [Cell; 3] = [Cell { x: 3, y: 4 }, Cell { x: 11, y: 4 }, Cell { x: 7, y: 4 }];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    fn idx(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }

    /// Converts a move expressed in this side's own frame (always attacking
    /// rightward) into the world frame.
    pub fn to_world(self, mv: Move) -> Move {
        match self {
            Side::A => mv,
            Side::B => mv.mirrored(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay];

    pub fn from_index(i: usize) -> Result<Move> {
        Move::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("move index {i} out of range 0..5")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Move::Up => (0, 1),
            Move::Down => (0, -1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
            Move::Stay => (0, 0),
        }
    }

    /// Left and right swapped.
    pub fn mirrored(self) -> Move {
        match self {
            Move::Left => Move::Right,
            Move::Right => Move::Left,
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    fn offset(self, mv: Move) -> Cell {
        let (dx, dy) = mv.delta();
        let c = Cell {
            x: self.x + dx,
            y: self.y + dy,
        };
        if c.on_grid() {
            c
        } else {
            self
        }
    }

    pub fn on_grid(self) -> bool {
        (0..WIDTH).contains(&self.x) && (0..HEIGHT).contains(&self.y)
    }

    fn mirrored(self) -> Cell {
        Cell {
            x: WIDTH - 1 - self.x,
            y: self.y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniSoccerState {
    /// Avatar cells indexed by side (A, B).
    pub players: [Cell; 2],
    pub ball: Cell,
    pub possession: Option<Side>,
    /// Horizontal facing (+1 right, −1 left) in world frame, per side.
    pub facing: [i32; 2],
    pub step: u32,
    /// Bit k set once side has been paid for carrying the ball past tenth k.
    pub rewarded_tenths: [u16; 2],
}

impl MiniSoccerState {
    pub fn kickoff() -> Self {
        Self {
            players: [KICKOFF[0], KICKOFF[1]],
            ball: KICKOFF[2],
            possession: None,
            facing: [1, -1],
            step: 0,
            rewarded_tenths: [0, 0],
        }
    }

    pub fn player(&self, side: Side) -> Cell {
        self.players[side.idx()]
    }

    /// Left-right mirror with the players' roles swapped.
    pub fn mirrored(&self) -> Self {
        Self {
            players: [self.players[1].mirrored(), self.players[0].mirrored()],
            ball: self.ball.mirrored(),
            possession: self.possession.map(Side::other),
            facing: [-self.facing[1], -self.facing[0]],
            step: self.step,
            rewarded_tenths: [self.rewarded_tenths[1], self.rewarded_tenths[0]],
        }
    }

    /// Column progress toward `side`'s target goal, 0 at own goal.
    fn progress(side: Side, c: Cell) -> i32 {
        match side {
            Side::A => c.x,
            Side::B => WIDTH - 1 - c.x,
        }
    }
}

/// Rewards from one simultaneous step; `reward_b == -reward_a` always.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoccerStep {
    pub reward_a: f64,
    pub reward_b: f64,
    pub done: bool,
    pub scored: Option<Side>,
}

impl SoccerStep {
    pub fn reward(&self, side: Side) -> f64 {
        match side {
            Side::A => self.reward_a,
            Side::B => self.reward_b,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MiniSoccer {
    state: MiniSoccerState,
    rng: Rng64,
    done: bool,
}

impl MiniSoccer {
    /// `seed` drives the steal coin flips only.
    pub fn new(seed: u64) -> Self {
        Self::from_state(MiniSoccerState::kickoff(), seed)
    }

    pub fn from_state(state: MiniSoccerState, seed: u64) -> Self {
        Self {
            state,
            rng: Rng64::seed_from_u64(seed),
            done: false,
        }
    }

    /// Starts a new episode; the steal RNG stream continues.
    pub fn reset(&mut self) {
        self.state = MiniSoccerState::kickoff();
        self.done = false;
    }

    pub fn state(&self) -> &MiniSoccerState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Observation for `side` in its own frame (attacking rightward), every
    /// entry in [−1, 1].
    pub fn observe(&self, side: Side) -> Vec<f64> {
        let s = &self.state;
        let frame = |c: Cell| match side {
            Side::A => c,
            Side::B => c.mirrored(),
        };
        let nx = |c: Cell| 2.0 * f64::from(frame(c).x) / f64::from(WIDTH - 1) - 1.0;
        let ny = |c: Cell| 2.0 * f64::from(c.y) / f64::from(HEIGHT - 1) - 1.0;
        let me = s.player(side);
        let opp = s.player(side.other());
        let (own, theirs, none) = match s.possession {
            Some(p) if p == side => (1.0, 0.0, 0.0),
            Some(_) => (0.0, 1.0, 0.0),
            None => (0.0, 0.0, 1.0),
        };
        let flip = if side == Side::A { 1.0 } else { -1.0 };
        vec![
            nx(me),
            ny(me),
            nx(opp),
            ny(opp),
            nx(s.ball),
            ny(s.ball),
            own,
            theirs,
            none,
            flip,
            1.0 - f64::from(s.step) / f64::from(MAX_STEPS),
            flip * f64::from(s.facing[side.other().idx()]),
        ]
    }

    /// Applies both players' world-frame moves.
    pub fn step(&mut self, move_a: Move, move_b: Move) -> Result<SoccerStep> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let s = &mut self.state;
        let moves = [move_a, move_b];
        for (i, m) in moves.iter().enumerate() {
            match m {
                Move::Left => s.facing[i] = -1,
                Move::Right => s.facing[i] = 1,
                _ => {}
            }
        }
        let pos = s.players;
        let mut target = [pos[0].offset(move_a), pos[1].offset(move_b)];
        let possessor_before = s.possession;

        match s.possession {
            Some(p) => {
                let (pi, ni) = (p.idx(), p.other().idx());
                if target[ni] == pos[pi] || target[ni] == target[pi] {
                    // Tackle: both stay put, coin flip for the ball.
                    target = pos;
                    if self.rng.random_bool(STEAL_PROB) {
                        s.possession = Some(p.other());
                    }
                } else if target[pi] == pos[ni] && target[ni] == pos[ni] {
                    target[pi] = pos[pi];
                }
            }
            None => {
                if target[0] == target[1] || (target[0] == pos[1] && target[1] == pos[0]) {
                    target = pos;
                } else {
                    for i in 0..2 {
                        let j = 1 - i;
                        if target[i] == pos[j] && target[j] == pos[j] {
                            target[i] = pos[i];
                        }
                    }
                }
            }
        }
        s.players = target;
        match s.possession {
            Some(p) => s.ball = s.player(p),
            None => {
                for side in [Side::A, Side::B] {
                    if s.player(side) == s.ball {
                        s.possession = Some(side);
                    }
                }
            }
        }
        s.step += 1;

        let mut reward_a = 0.0;
        let mut scored = None;
        if let Some(p) = s.possession {
            let x = s.player(p).x;
            if x == WIDTH - 1 {
                scored = Some(Side::A);
            } else if x == 0 {
                scored = Some(Side::B);
            }
        }
        if let Some(scorer) = scored {
            reward_a = if scorer == Side::A { GOAL_REWARD } else { -GOAL_REWARD };
            let (step, tenths) = (s.step, s.rewarded_tenths);
            *s = MiniSoccerState::kickoff();
            s.step = step;
            s.rewarded_tenths = tenths;
        } else if let (Some(p), Some(q)) = (s.possession, possessor_before) {
            if p == q {
                let before = MiniSoccerState::progress(p, pos[p.idx()]);
                let after = MiniSoccerState::progress(p, s.player(p));
                // Tenth boundary k sits at column 14·k/10; a one-cell move
                // crosses at most one of them.
                for k in 1..10 {
                    let bit = 1u16 << k;
                    let edge = (WIDTH - 1) * k;
                    if 10 * before < edge && edge <= 10 * after && s.rewarded_tenths[p.idx()] & bit == 0 {
                        s.rewarded_tenths[p.idx()] |= bit;
                        reward_a += if p == Side::A { SHAPING_REWARD } else { -SHAPING_REWARD };
                    }
                }
            }
        }
        self.done = s.step >= MAX_STEPS;
        Ok(SoccerStep {
            reward_a,
            reward_b: -reward_a,
            done: self.done,
            scored,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(players: [(i32, i32); 2], ball: (i32, i32), possession: Option<Side>) -> MiniSoccer {
        let mut st = MiniSoccerState::kickoff();
        st.players = [
            Cell {
                x: players[0].0,
                y: players[0].1,
            },
            Cell {
                x: players[1].0,
                y: players[1].1,
            },
        ];
        st.ball = Cell { x: ball.0, y: ball.1 };
        st.possession = possession;
        MiniSoccer::from_state(st, 0)
    }

    #[test]
    fn null_step_only_advances_counter() {
        let mut env = MiniSoccer::new(1);
        let before = env.state().clone();
        let out = env.step(Move::Stay, Move::Stay).unwrap();
        assert_eq!((out.reward_a, out.reward_b, out.done), (0.0, 0.0, false));
        let mut expect = before;
        expect.step = 1;
        assert_eq!(env.state(), &expect);
    }

    #[test]
    fn advancing_into_a_new_tenth_pays_shaping() {
        // Column 4 → 5 crosses the boundary at 4.2 (k = 3).
        let mut env = with([(4, 2), (12, 7)], (4, 2), Some(Side::A));
        let out = env.step(Move::Right, Move::Stay).unwrap();
        assert!((out.reward_a - 0.1).abs() < 1e-15);
        assert_eq!(out.reward_b, -out.reward_a);
        // Going back and forth is not paid twice.
        env.step(Move::Left, Move::Stay).unwrap();
        let again = env.step(Move::Right, Move::Stay).unwrap();
        assert_eq!(again.reward_a, 0.0);
    }

    #[test]
    fn dribbling_into_the_goal_scores_and_resets() {
        let mut env = with([(13, 4), (2, 1)], (13, 4), Some(Side::A));
        let out = env.step(Move::Right, Move::Stay).unwrap();
        assert_eq!((out.reward_a, out.reward_b), (1.0, -1.0));
        assert_eq!(out.scored, Some(Side::A));
        assert_eq!(env.state().players, [KICKOFF[0], KICKOFF[1]]);
        assert_eq!(env.state().possession, None);
    }

    #[test]
    fn own_goal_counts_for_the_opponent() {
        let mut env = with([(1, 4), (9, 1)], (1, 4), Some(Side::A));
        let out = env.step(Move::Left, Move::Stay).unwrap();
        assert_eq!(out.reward_a, -1.0);
        assert_eq!(out.scored, Some(Side::B));
    }

    #[test]
    fn same_target_blocks_both() {
        let mut env = with([(5, 4), (7, 4)], (0, 0), None);
        env.step(Move::Right, Move::Left).unwrap();
        assert_eq!(env.state().players[0], Cell { x: 5, y: 4 });
        assert_eq!(env.state().players[1], Cell { x: 7, y: 4 });
    }

    #[test]
    fn moving_onto_ball_grabs_it() {
        let mut env = with([(6, 4), (12, 1)], (7, 4), None);
        env.step(Move::Right, Move::Stay).unwrap();
        assert_eq!(env.state().possession, Some(Side::A));
        env.step(Move::Up, Move::Stay).unwrap();
        assert_eq!(env.state().ball, Cell { x: 7, y: 5 });
    }

    #[test]
    fn tackles_steal_about_half_the_time() {
        let mut steals = 0;
        let n = 2000;
        for seed in 0..n {
            let mut st = MiniSoccerState::kickoff();
            st.players = [Cell { x: 6, y: 4 }, Cell { x: 7, y: 4 }];
            st.ball = st.players[0];
            st.possession = Some(Side::A);
            let mut env = MiniSoccer::from_state(st, seed);
            env.step(Move::Stay, Move::Left).unwrap();
            assert_eq!(env.state().players[1], Cell { x: 7, y: 4 });
            if env.state().possession == Some(Side::B) {
                assert_eq!(env.state().ball, Cell { x: 7, y: 4 });
                steals += 1;
            }
        }
        let frac = f64::from(steals) / f64::from(n as u32);
        assert!((frac - 0.5).abs() < 0.05, "steal rate {frac}");
    }

    #[test]
    fn episode_ends_at_step_limit_and_then_errors() {
        let mut env = MiniSoccer::new(0);
        for i in 0..MAX_STEPS {
            let out = env.step(Move::Stay, Move::Stay).unwrap();
            assert_eq!(out.done, i + 1 == MAX_STEPS);
        }
        assert!(matches!(env.step(Move::Stay, Move::Stay), Err(Error::EpisodeFinished)));
        env.reset();
        assert!(env.step(Move::Stay, Move::Stay).is_ok());
    }

    #[test]
    fn observation_is_side_symmetric_at_kickoff() {
        let env = MiniSoccer::new(0);
        let a = env.observe(Side::A);
        let b = env.observe(Side::B);
        assert_eq!(a.len(), OBS_DIM);
        assert_eq!(a[..9], b[..9]);
        assert_eq!((a[9], b[9]), (1.0, -1.0));
        assert_eq!(a[11], b[11]);
    }

    #[test]
    fn mirrored_game_swaps_rewards() {
        let mut env = with([(4, 2), (6, 2)], (4, 2), Some(Side::A));
        let mut mirror = MiniSoccer::from_state(env.state().mirrored(), 0);
        let seq = [
            (Move::Right, Move::Left),
            (Move::Right, Move::Down),
            (Move::Up, Move::Stay),
            (Move::Right, Move::Left),
        ];
        for (ma, mb) in seq {
            let o = env.step(ma, mb).unwrap();
            let m = mirror.step(mb.mirrored(), ma.mirrored()).unwrap();
            assert_eq!((o.reward_a, o.reward_b), (m.reward_b, m.reward_a));
            assert_eq!(env.state().mirrored(), *mirror.state());
            assert_eq!(env.observe(Side::A)[..9], mirror.observe(Side::B)[..9]);
        }
    }
}
