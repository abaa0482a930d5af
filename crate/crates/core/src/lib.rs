//! White-box adversarial policies at desk scale.
//!
//! The crate trains target agents with PPO and then trains attackers that
//! observe the target's action distribution, value estimate and/or latent
//! activations in addition to the world state. Three experiment families are
//! provided:
//!
//! - [`attack2p`]: adversaries against frozen targets in the two-player
//!   [`envs::MiniSoccer`] game, in four observation modes.
//! - [`lmattack`]: an RL adversary that writes an additive perturbation into a
//!   frozen [`lmattack::TinyLm`] residual stream to raise the frequency of a
//!   forbidden token set.
//! - [`rarl`]: robust adversarial training of a continuous-control agent
//!   against an ensemble of bounded action perturbers, evaluated on a grid of
//!   shifted dynamics.
//!
//! Everything below those drivers is plain building blocks: a small dense
//! numerical core ([`numkit`]), introspectable policies ([`policy`]), PPO with
//! GAE ([`ppo`]), the feature extractor ([`introspect`]) and the statistics /
//! config / persistence harness ([`harness`]).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod attack2p;
pub mod envs;
mod error;
pub mod harness;
pub mod introspect;
pub mod lmattack;
pub mod numkit;
pub mod policy;
pub mod ppo;
pub mod rarl;

pub use error::{Error, Result};

/// Seeded generator used for every stochastic draw in the crate.
pub type Rng64 = rand_chacha::ChaCha8Rng;
