//! Desk-scale environments: a two-player zero-sum grid soccer game with a
//! scripted opponent, and a one-dimensional runner whose friction and mass
//! can be shifted.

mod bot;
mod runner;
mod soccer;

pub use bot::{scripted_bot, BOT_EPSILON};
pub use runner::{make_shifted_env, multiplier_grid, ParamRunner, RunnerConstants, RUNNER_OBS_DIM};
pub use soccer::{
    Cell, MiniSoccer, MiniSoccerState, Move, Side, SoccerStep, GOAL_REWARD, HEIGHT, KICKOFF, MAX_STEPS, OBS_DIM,
    SHAPING_REWARD, WIDTH,
};
