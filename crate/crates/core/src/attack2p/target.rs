//! Two-phase target pretraining and the on-disk target pool.

use std::path::{Path, PathBuf};

use super::play::{evaluate_match, MatchRngs, MatchSource, Opponent};
use super::Attack2pConfig;
use crate::envs::OBS_DIM;
use crate::harness::{mean, Config, SeedTree};
use crate::policy::{HeadKind, PolicyNet, PolicySpec};
use crate::ppo::{IterationMetrics, PpoConfig, PpoTrainer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub phase1_steps: u64,
    pub phase2_steps: u64,
    pub entropy_phase1: f64,
    pub entropy_phase2: f64,
    /// Mean net points of the phase-1 agent against the bot.
    pub gate_net_points: f64,
    pub gate_episodes: usize,
    /// Failed the competence gate; never used as an attack target.
    pub flagged: bool,
}

impl Provenance {
    fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("seed", self.seed);
        c.set("phase1_steps", self.phase1_steps);
        c.set("phase2_steps", self.phase2_steps);
        c.set("entropy_phase1", self.entropy_phase1);
        c.set("entropy_phase2", self.entropy_phase2);
        c.set("gate_net_points", self.gate_net_points);
        c.set("gate_episodes", self.gate_episodes);
        c.set("flagged", self.flagged);
        c
    }

    fn from_config(c: &Config) -> Result<Self> {
        Ok(Self {
            seed: c.parse_key("seed")?,
            phase1_steps: c.parse_key("phase1_steps")?,
            phase2_steps: c.parse_key("phase2_steps")?,
            entropy_phase1: c.parse_key("entropy_phase1")?,
            entropy_phase2: c.parse_key("entropy_phase2")?,
            gate_net_points: c.parse_key("gate_net_points")?,
            gate_episodes: c.parse_key("gate_episodes")?,
            flagged: c.parse_key("flagged")?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TargetArtifact {
    pub net: PolicyNet,
    pub provenance: Provenance,
    /// Per-iteration PPO metrics over both phases.
    pub metrics: Vec<IterationMetrics>,
}

fn iterations(steps: u64, ppo: &PpoConfig) -> u64 {
    steps.div_ceil(ppo.steps_per_iter as u64)
}

/// Phase 1: PPO against the scripted bot with an entropy bonus. Phase 2:
/// PPO against a frozen, stochastic snapshot of the phase-1 agent with an
/// entropy penalty. The phase-1 agent must beat the bot on average.
pub fn pretrain_target(cfg: &Attack2pConfig, seed: SeedTree) -> Result<TargetArtifact> {
    let mut init_rng = seed.rng_for("init", 0);
    let spec = PolicySpec::new(OBS_DIM, cfg.hidden, HeadKind::Categorical(5));
    let net = PolicyNet::new(&spec, &mut init_rng)?;
    let mut trainer = PpoTrainer::new(
        net,
        PpoConfig {
            entropy_coef: cfg.entropy_phase1,
            ..cfg.ppo.clone()
        },
    )?;
    let mut metrics = Vec::new();

    let mut ppo_rng = seed.rng_for("ppo", 1);
    let mut source = MatchSource::new(
        Opponent::Bot,
        None,
        MatchRngs {
            env: seed.child("env", 1).seed(),
            opponent: seed.rng_for("opponent", 1),
            side: seed.rng_for("side", 1),
        },
    )?;
    for _ in 0..iterations(cfg.pretrain_phase1_steps, &cfg.ppo) {
        metrics.push(trainer.train_iteration(&mut source, &mut ppo_rng)?);
    }
    let phase1_steps = trainer.env_steps();
    let gate = evaluate_match(&trainer.net, None, Opponent::Bot, cfg.gate_episodes, seed.child("gate", 0))?;
    let gate_net_points = mean(&gate);

    let snapshot = trainer.net.clone();
    trainer.cfg.entropy_coef = cfg.entropy_phase2;
    let mut ppo_rng = seed.rng_for("ppo", 2);
    let mut source = MatchSource::new(
        Opponent::Policy {
            net: &snapshot,
            stochastic: true,
        },
        None,
        MatchRngs {
            env: seed.child("env", 2).seed(),
            opponent: seed.rng_for("opponent", 2),
            side: seed.rng_for("side", 2),
        },
    )?;
    for _ in 0..iterations(cfg.pretrain_phase2_steps, &cfg.ppo) {
        metrics.push(trainer.train_iteration(&mut source, &mut ppo_rng)?);
    }
    let phase2_steps = trainer.env_steps() - phase1_steps;
    Ok(TargetArtifact {
        net: trainer.net,
        provenance: Provenance {
            seed: seed.seed(),
            phase1_steps,
            phase2_steps,
            entropy_phase1: cfg.entropy_phase1,
            entropy_phase2: cfg.entropy_phase2,
            gate_net_points,
            gate_episodes: cfg.gate_episodes,
            flagged: gate_net_points.is_nan() || gate_net_points <= 0.0,
        },
        metrics,
    })
}

/// Writes `target-NN.ckpt` and `target-NN.provenance` for every artifact,
/// flagged ones included.
pub fn save_pool(dir: &Path, targets: &[TargetArtifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        let ckpt = dir.join(format!("target-{i:02}.ckpt"));
        t.net.save(&ckpt)?;
        let prov = dir.join(format!("target-{i:02}.provenance"));
        let mut c = t.provenance.to_config();
        c.set("sha256", t.net.content_hash());
        std::fs::write(&prov, c.to_text(&[])).map_err(|e| Error::io(&prov, e))?;
        paths.push(ckpt);
    }
    Ok(paths)
}

/// Loads every unflagged target of a pool directory, in file-name order.
pub fn load_pool(dir: &Path) -> Result<Vec<(PolicyNet, Provenance)>> {
    let mut ckpts: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    ckpts.sort();
    let mut out = Vec::new();
    for ckpt in ckpts {
        let net = PolicyNet::load(&ckpt)?;
        let prov = Provenance::from_config(&Config::load(&ckpt.with_extension("provenance"))?)?;
        if !prov.flagged {
            out.push((net, prov));
        }
    }
    Ok(out)
}
