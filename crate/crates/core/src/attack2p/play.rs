//! Matches between a learner and a fixed opponent.

use rand::Rng;

use crate::envs::{scripted_bot, MiniSoccer, Move, Side};
use crate::introspect::Introspector;
use crate::policy::{ForwardRecord, PolicyNet};
use crate::ppo::{RolloutSource, Transition};
use crate::harness::SeedTree;
use crate::{Error, Result, Rng64};

/// Who the learner plays against.
#[derive(Clone, Copy, Debug)]
pub enum Opponent<'a> {
    Bot,
    /// A frozen policy; `stochastic` samples its actions, otherwise it plays the mode.
    Policy { net: &'a PolicyNet, stochastic: bool },
}

impl Opponent<'_> {
    /// The opponent's action and, for policies, the forward pass it came from.
    fn act(&self, obs: &[f64], rng: &mut Rng64) -> Result<(Move, Option<ForwardRecord>)> {
        match self {
            Opponent::Bot => Ok((scripted_bot(obs, rng), None)),
            Opponent::Policy { net, stochastic } => {
                let rec = if *stochastic {
                    net.forward(obs, rng)?
                } else {
                    net.forward_deterministic(obs)?
                };
                Ok((Move::from_index(rec.action.discrete())?, Some(rec)))
            }
        }
    }
}

/// Independent RNG streams of a match.
pub struct MatchRngs {
    /// Steal coin flips inside the environment.
    pub env: u64,
    /// Opponent action sampling (and bot exploration).
    pub opponent: Rng64,
    /// Which side the learner plays each episode.
    pub side: Rng64,
}

/// A MiniSoccer match seen from the learner's side, usable as a PPO rollout
/// source. The learner's side is drawn at random every episode.
pub struct MatchSource<'a> {
    env: MiniSoccer,
    opponent: Opponent<'a>,
    introspector: Option<Introspector>,
    opp_rng: Rng64,
    side_rng: Rng64,
    side: Side,
    pending: Option<(Vec<f64>, Move)>,
    goals: (u32, u32),
    finished_net_points: Vec<f64>,
}

impl<'a> MatchSource<'a> {
    /// `introspector` appends the opponent's `m_t` to the learner observation
    /// and requires a policy opponent.
    pub fn new(opponent: Opponent<'a>, introspector: Option<Introspector>, rngs: MatchRngs) -> Result<Self> {
        if let Some(intro) = &introspector {
            match opponent {
                Opponent::Policy { net, .. } => intro.check_target(net)?,
                Opponent::Bot => {
                    return Err(Error::InvalidArgument("introspection needs a policy opponent".into()));
                }
            }
        }
        let mut side_rng = rngs.side;
        let side = if side_rng.random_bool(0.5) { Side::A } else { Side::B };
        Ok(Self {
            env: MiniSoccer::new(rngs.env),
            opponent,
            introspector,
            opp_rng: rngs.opponent,
            side_rng,
            side,
            pending: None,
            goals: (0, 0),
            finished_net_points: Vec::new(),
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Goals-for minus goals-against of every episode finished so far.
    pub fn finished_net_points(&self) -> &[f64] {
        &self.finished_net_points
    }

    pub fn introspector(&self) -> Option<&Introspector> {
        self.introspector.as_ref()
    }

    pub fn into_introspector(self) -> Option<Introspector> {
        self.introspector
    }
}

impl RolloutSource for MatchSource<'_> {
    fn observation(&mut self) -> Result<Vec<f64>> {
        if let Some((obs, _)) = &self.pending {
            return Ok(obs.clone());
        }
        let base = self.env.observe(self.side);
        let opp_obs = self.env.observe(self.side.other());
        // One forward pass per agent per step: the same record yields the
        // opponent's executed action and the learner's m_t.
        let (opp_move, record) = self.opponent.act(&opp_obs, &mut self.opp_rng)?;
        let obs = match (&mut self.introspector, &record) {
            (Some(intro), Some(rec)) => intro.compose(&base, rec)?,
            _ => base,
        };
        self.pending = Some((obs.clone(), opp_move));
        Ok(obs)
    }

    fn step(&mut self, record: &ForwardRecord) -> Result<Transition> {
        if self.pending.is_none() {
            self.observation()?;
        }
        let (_, opp_own) = self.pending.take().expect("observation cached above");
        let mine = self.side.to_world(Move::from_index(record.action.discrete())?);
        let theirs = self.side.other().to_world(opp_own);
        let (ma, mb) = match self.side {
            Side::A => (mine, theirs),
            Side::B => (theirs, mine),
        };
        let out = self.env.step(ma, mb)?;
        let reward = out.reward(self.side);
        match out.scored {
            Some(s) if s == self.side => self.goals.0 += 1,
            Some(_) => self.goals.1 += 1,
            None => {}
        }
        if out.done {
            self.finished_net_points
                .push(f64::from(self.goals.0) - f64::from(self.goals.1));
            self.goals = (0, 0);
            self.env.reset();
            self.side = if self.side_rng.random_bool(0.5) { Side::A } else { Side::B };
        }
        Ok(Transition {
            reward,
            done: out.done,
        })
    }
}

/// Net points per episode with both sides acting deterministically (the bot
/// keeps its exploration). The learner alternates between sides A and B and
/// its introspection statistics are frozen.
pub fn evaluate_match(
    learner: &PolicyNet,
    introspector: Option<&Introspector>,
    opponent: Opponent<'_>,
    episodes: usize,
    seed: SeedTree,
) -> Result<Vec<f64>> {
    let opponent = match opponent {
        Opponent::Policy { net, .. } => Opponent::Policy { net, stochastic: false },
        Opponent::Bot => Opponent::Bot,
    };
    let mut intro = introspector.cloned();
    if let Some(i) = &mut intro {
        i.training = false;
    }
    let mut opp_rng = seed.rng_for("opponent", 0);
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let side = if ep % 2 == 0 { Side::A } else { Side::B };
        let mut env = MiniSoccer::new(seed.child("env", ep as u64).seed());
        let mut net_points = 0.0;
        loop {
            let base = env.observe(side);
            let (opp_move, rec) = opponent.act(&env.observe(side.other()), &mut opp_rng)?;
            let obs = match (&mut intro, &rec) {
                (Some(i), Some(r)) => i.compose(&base, r)?,
                _ => base,
            };
            let mine = side.to_world(Move::from_index(learner.deterministic_action(&obs)?.discrete())?);
            let theirs = side.other().to_world(opp_move);
            let step = match side {
                Side::A => env.step(mine, theirs)?,
                Side::B => env.step(theirs, mine)?,
            };
            match step.scored {
                Some(s) if s == side => net_points += 1.0,
                Some(_) => net_points -= 1.0,
                None => {}
            }
            if step.done {
                break;
            }
        }
        out.push(net_points);
    }
    Ok(out)
}
