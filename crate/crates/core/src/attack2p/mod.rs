//! Adversarial attacks on frozen MiniSoccer targets.
//!
//! Targets are pretrained in two phases (against the scripted bot with an
//! entropy bonus, then against a frozen copy of themselves with an entropy
//! penalty). Adversaries are then trained with PPO against each frozen
//! target under every requested [`IntrospectionMode`], and modes are compared
//! by net points per episode at fixed evaluation points.

mod play;
mod target;

pub use play::{evaluate_match, MatchRngs, MatchSource, Opponent};
pub use target::{load_pool, pretrain_target, save_pool, Provenance, TargetArtifact};

use std::path::Path;

use rayon::prelude::*;

use crate::envs::OBS_DIM;
use crate::harness::{
    aggregate_curves, curve_csv, labelled_points_csv, mean, ppo_from_config, ppo_schema, welch_t_one_sided, write_text,
    Config, Curve, CurvePoint, SeedTree, WelchResult,
};
use crate::introspect::{IntrospectionMode, Introspector};
use crate::policy::{HeadKind, PolicyNet, PolicySpec};
use crate::ppo::{write_metrics_csv, PpoConfig, PpoTrainer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Attack2pConfig {
    pub hidden: usize,
    /// Number of unflagged targets to pretrain when no pool is given.
    pub targets: usize,
    pub seeds: usize,
    pub modes: Vec<IntrospectionMode>,
    pub pretrain_phase1_steps: u64,
    pub pretrain_phase2_steps: u64,
    pub entropy_phase1: f64,
    pub entropy_phase2: f64,
    /// Adversary training budget in environment steps.
    pub steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub gate_episodes: usize,
    pub target_stochastic: bool,
    pub normalize_m: bool,
    /// Fraction of the budget used for the early comparison.
    pub early_fraction: f64,
    /// Existing pool directory; empty means pretrain.
    pub target_pool: String,
    pub ppo: PpoConfig,
}

impl Default for Attack2pConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            targets: 5,
            seeds: 3,
            modes: vec![
                IntrospectionMode::BlackBox,
                IntrospectionMode::ActionValue,
                IntrospectionMode::Latent,
                IntrospectionMode::Full,
            ],
            pretrain_phase1_steps: 300_000,
            pretrain_phase2_steps: 300_000,
            entropy_phase1: 0.01,
            entropy_phase2: -0.001,
            steps: 500_000,
            eval_interval: 50_000,
            eval_episodes: 20,
            gate_episodes: 100,
            target_stochastic: true,
            normalize_m: true,
            early_fraction: 0.1,
            target_pool: String::new(),
            ppo: PpoConfig {
                steps_per_iter: 2000,
                minibatch_size: 250,
                ..PpoConfig::default()
            },
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Attack2pConfig {
    pub fn schema() -> Vec<(&'static str, String)> {
        let d = Self::default();
        let mut s = vec![
            ("attack2p.hidden", d.hidden.to_string()),
            ("attack2p.targets", d.targets.to_string()),
            ("attack2p.seeds", d.seeds.to_string()),
            ("attack2p.modes", join(&d.modes)),
            ("attack2p.pretrain_phase1_steps", d.pretrain_phase1_steps.to_string()),
            ("attack2p.pretrain_phase2_steps", d.pretrain_phase2_steps.to_string()),
            ("attack2p.entropy_phase1", d.entropy_phase1.to_string()),
            ("attack2p.entropy_phase2", d.entropy_phase2.to_string()),
            ("attack2p.steps", d.steps.to_string()),
            ("attack2p.eval_interval", d.eval_interval.to_string()),
            ("attack2p.eval_episodes", d.eval_episodes.to_string()),
            ("attack2p.gate_episodes", d.gate_episodes.to_string()),
            ("attack2p.target_stochastic", d.target_stochastic.to_string()),
            ("attack2p.normalize_m", d.normalize_m.to_string()),
            ("attack2p.early_fraction", d.early_fraction.to_string()),
            ("attack2p.target_pool", d.target_pool.clone()),
        ];
        s.extend(ppo_schema(&d.ppo));
        s
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        let cfg = Self {
            hidden: c.parse_key("attack2p.hidden")?,
            targets: c.parse_key("attack2p.targets")?,
            seeds: c.parse_key("attack2p.seeds")?,
            modes: c.parse_list("attack2p.modes")?,
            pretrain_phase1_steps: c.parse_key("attack2p.pretrain_phase1_steps")?,
            pretrain_phase2_steps: c.parse_key("attack2p.pretrain_phase2_steps")?,
            entropy_phase1: c.parse_key("attack2p.entropy_phase1")?,
            entropy_phase2: c.parse_key("attack2p.entropy_phase2")?,
            steps: c.parse_key("attack2p.steps")?,
            eval_interval: c.parse_key("attack2p.eval_interval")?,
            eval_episodes: c.parse_key("attack2p.eval_episodes")?,
            gate_episodes: c.parse_key("attack2p.gate_episodes")?,
            target_stochastic: c.parse_key("attack2p.target_stochastic")?,
            normalize_m: c.parse_key("attack2p.normalize_m")?,
            early_fraction: c.parse_key("attack2p.early_fraction")?,
            target_pool: c.require("attack2p.target_pool")?.to_string(),
            ppo: ppo_from_config(c)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        let spi = self.ppo.steps_per_iter as u64;
        let bad = |m: String| Err(Error::InvalidArgument(format!("attack2p: {m}")));
        if self.eval_interval == 0 || !self.eval_interval.is_multiple_of(spi) {
            return bad(format!(
                "eval_interval {} must be a positive multiple of steps_per_iter {spi}",
                self.eval_interval
            ));
        }
        if !self.steps.is_multiple_of(self.eval_interval) {
            return bad(format!("steps {} must be a multiple of eval_interval {}", self.steps, self.eval_interval));
        }
        if self.modes.is_empty() || self.seeds == 0 || self.eval_episodes == 0 {
            return bad("need at least one mode, seed and eval episode".into());
        }
        if !(0.0..=1.0).contains(&self.early_fraction) {
            return bad("early_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Evaluation grid: 0, eval_interval, …, steps.
    pub fn eval_steps(&self) -> Vec<u64> {
        (0..=self.steps / self.eval_interval).map(|k| k * self.eval_interval).collect()
    }

    /// Largest grid point not above `early_fraction · steps` (at least the first nonzero point).
    pub fn early_step(&self) -> u64 {
        let raw = (self.early_fraction * self.steps as f64) as u64;
        (raw / self.eval_interval * self.eval_interval).max(self.eval_interval.min(self.steps))
    }
}

#[derive(Clone, Debug)]
pub struct AttackRunResult {
    pub mode: IntrospectionMode,
    pub curve: Curve,
    pub adversary: PolicyNet,
    pub introspector: Introspector,
    pub env_steps: u64,
}

/// Trains one adversary against a frozen target.
///
/// `seed` should not depend on `mode` so that modes share initial
/// conditions as far as their input widths allow and see identical
/// evaluation episodes.
pub fn train_adversary(
    target: &PolicyNet,
    mode: IntrospectionMode,
    cfg: &Attack2pConfig,
    seed: SeedTree,
) -> Result<AttackRunResult> {
    cfg.validate()?;
    if target.input_dim() != OBS_DIM {
        return Err(Error::dim("attack target observation width", OBS_DIM, target.input_dim()));
    }
    let introspector = Introspector::new(mode, target, cfg.normalize_m);
    let spec = PolicySpec::new(OBS_DIM + introspector.width(), cfg.hidden, HeadKind::Categorical(5));
    let adversary = PolicyNet::new(&spec, &mut seed.rng_for("init", 0))?;
    let mut trainer = PpoTrainer::new(adversary, cfg.ppo.clone())?;
    let opponent = Opponent::Policy {
        net: target,
        stochastic: cfg.target_stochastic,
    };
    let mut source = MatchSource::new(
        opponent,
        Some(introspector),
        MatchRngs {
            env: seed.child("env", 0).seed(),
            opponent: seed.rng_for("opponent", 0),
            side: seed.rng_for("side", 0),
        },
    )?;
    let mut ppo_rng = seed.rng_for("ppo", 0);
    let eval_seed = seed.child("eval", 0);
    let per_eval = cfg.eval_interval / cfg.ppo.steps_per_iter as u64;
    let mut curve = Curve {
        label: mode.name().to_string(),
        steps: Vec::new(),
        values: Vec::new(),
    };
    let eval = |net: &PolicyNet, intro: Option<&Introspector>| -> Result<f64> {
        Ok(mean(&evaluate_match(net, intro, opponent, cfg.eval_episodes, eval_seed)?))
    };
    curve.steps.push(0);
    curve.values.push(eval(&trainer.net, source.introspector())?);
    for it in 1..=cfg.steps / cfg.ppo.steps_per_iter as u64 {
        trainer.train_iteration(&mut source, &mut ppo_rng)?;
        if it % per_eval == 0 {
            curve.steps.push(trainer.env_steps());
            curve.values.push(eval(&trainer.net, source.introspector())?);
        }
    }
    let env_steps = trainer.env_steps();
    Ok(AttackRunResult {
        mode,
        curve,
        adversary: trainer.net,
        introspector: source.into_introspector().expect("constructed with an introspector"),
        env_steps,
    })
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub target: usize,
    pub seed: usize,
    pub result: AttackRunResult,
}

/// One white-box-vs-BlackBox test.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTest {
    pub mode: IntrospectionMode,
    /// `final`, `early` or `auc`.
    pub checkpoint: &'static str,
    pub env_steps: u64,
    pub mean_mode: f64,
    pub mean_baseline: f64,
    pub n_mode: usize,
    pub n_baseline: usize,
    /// `None` when a group has fewer than two samples.
    pub welch: Option<WelchResult>,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub steps: Vec<u64>,
    pub runs: Vec<RunRecord>,
    /// Seed-averaged curve per (mode, target); the sample unit for tests.
    pub per_target: Vec<(IntrospectionMode, Vec<Curve>)>,
    pub curves: Vec<(IntrospectionMode, Vec<CurvePoint>)>,
    pub tests: Vec<ModeTest>,
}

impl Comparison {
    /// Per-target values of `mode` at grid step `step`.
    pub fn values_at(&self, mode: IntrospectionMode, step: u64) -> Vec<f64> {
        self.per_target
            .iter()
            .filter(|(m, _)| *m == mode)
            .flat_map(|(_, cs)| cs.iter().filter_map(|c| c.at(step)))
            .collect()
    }

    pub fn test(&self, mode: IntrospectionMode, checkpoint: &str) -> Option<&ModeTest> {
        self.tests.iter().find(|t| t.mode == mode && t.checkpoint == checkpoint)
    }

    pub fn curves_csv(&self) -> String {
        let series: Vec<(String, Vec<CurvePoint>)> =
            self.curves.iter().map(|(m, p)| (m.name().to_string(), p.clone())).collect();
        labelled_points_csv("mode", &series)
    }

    pub fn tests_csv(&self) -> String {
        let mut out = String::from("mode,baseline,checkpoint,env_steps,mean_mode,mean_baseline,n_mode,n_baseline,t,df,p\n");
        for t in &self.tests {
            let (tt, df, p) = t.welch.map_or((f64::NAN, f64::NAN, f64::NAN), |w| (w.t, w.df, w.p));
            out.push_str(&format!(
                "{},blackbox,{},{},{},{},{},{},{tt},{df},{p}\n",
                t.mode, t.checkpoint, t.env_steps, t.mean_mode, t.mean_baseline, t.n_mode, t.n_baseline
            ));
        }
        out
    }
}

fn seed_average(label: String, curves: &[&Curve]) -> Curve {
    let steps = curves[0].steps.clone();
    let values = (0..steps.len())
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / curves.len() as f64)
        .collect();
    Curve { label, steps, values }
}

/// Trains every (target, seed, mode) adversary and compares modes.
pub fn compare_modes(targets: &[PolicyNet], cfg: &Attack2pConfig, root: SeedTree) -> Result<Comparison> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("compare_modes needs at least one target".into()));
    }
    let jobs: Vec<(usize, usize, IntrospectionMode)> = (0..targets.len())
        .flat_map(|t| (0..cfg.seeds).flat_map(move |s| cfg.modes.iter().map(move |&m| (t, s, m))))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(t, s, mode)| {
            let seed = root.child("attack", t as u64).child("seed", s as u64);
            train_adversary(&targets[t], mode, cfg, seed).map(|result| RunRecord {
                target: t,
                seed: s,
                result,
            })
        })
        .collect::<Result<_>>()?;

    let steps = cfg.eval_steps();
    let mut per_target = Vec::new();
    let mut curves = Vec::new();
    for &mode in &cfg.modes {
        let mut cs = Vec::new();
        for t in 0..targets.len() {
            let mine: Vec<&Curve> = runs
                .iter()
                .filter(|r| r.target == t && r.result.mode == mode)
                .map(|r| &r.result.curve)
                .collect();
            cs.push(seed_average(format!("{mode}-t{t}"), &mine));
        }
        curves.push((mode, aggregate_curves(&cs)?));
        per_target.push((mode, cs));
    }
    let mut cmp = Comparison {
        steps,
        runs,
        per_target,
        curves,
        tests: Vec::new(),
    };
    if cfg.modes.contains(&IntrospectionMode::BlackBox) {
        let final_step = cfg.steps;
        let early = cfg.early_step();
        for &mode in cfg.modes.iter().filter(|m| **m != IntrospectionMode::BlackBox) {
            for (checkpoint, step) in [("final", final_step), ("early", early), ("auc", final_step)] {
                let (a, b) = if checkpoint == "auc" {
                    let auc = |m| -> Vec<f64> {
                        cmp.per_target
                            .iter()
                            .filter(|(x, _)| *x == m)
                            .flat_map(|(_, cs)| cs.iter().map(Curve::normalized_auc))
                            .collect()
                    };
                    (auc(mode), auc(IntrospectionMode::BlackBox))
                } else {
                    (cmp.values_at(mode, step), cmp.values_at(IntrospectionMode::BlackBox, step))
                };
                let welch = match welch_t_one_sided(&a, &b) {
                    Ok(w) => Some(w),
                    Err(e) => {
                        eprintln!("warning: skipping {mode} vs blackbox at {checkpoint}: {e}");
                        None
                    }
                };
                cmp.tests.push(ModeTest {
                    mode,
                    checkpoint,
                    env_steps: step,
                    mean_mode: mean(&a),
                    mean_baseline: mean(&b),
                    n_mode: a.len(),
                    n_baseline: b.len(),
                    welch,
                });
            }
        }
    }
    Ok(cmp)
}

/// Pretrains until `cfg.targets` artifacts pass the competence gate, trying
/// at most three times as many seeds. Returns every attempt in order.
pub fn pretrain_pool(cfg: &Attack2pConfig, root: SeedTree) -> Result<Vec<TargetArtifact>> {
    let mut all = Vec::new();
    let mut next = 0u64;
    let max_attempts = 3 * cfg.targets as u64;
    while all.iter().filter(|t: &&TargetArtifact| !t.provenance.flagged).count() < cfg.targets && next < max_attempts {
        let need = cfg.targets - all.iter().filter(|t: &&TargetArtifact| !t.provenance.flagged).count();
        let batch: Vec<u64> = (next..(next + need as u64).min(max_attempts)).collect();
        next += batch.len() as u64;
        let trained: Vec<TargetArtifact> = batch
            .par_iter()
            .map(|&i| pretrain_target(cfg, root.child("target", i)))
            .collect::<Result<_>>()?;
        all.extend(trained);
    }
    Ok(all)
}

/// Full experiment: pool (loaded or pretrained), comparison, artifacts.
pub fn run(c: &Config, out: &Path) -> Result<Comparison> {
    let cfg = Attack2pConfig::from_config(c)?;
    let root = SeedTree::new(c.seed()?).child("attack2p", 0);
    let targets: Vec<PolicyNet> = if cfg.target_pool.is_empty() {
        let all = pretrain_pool(&cfg, root)?;
        let dir = out.join("targets");
        save_pool(&dir, &all)?;
        for (i, t) in all.iter().enumerate() {
            write_metrics_csv(&dir.join(format!("target-{i:02}-metrics.csv")), &t.metrics)?;
        }
        all.into_iter().filter(|t| !t.provenance.flagged).map(|t| t.net).collect()
    } else {
        load_pool(Path::new(&cfg.target_pool))?.into_iter().map(|(n, _)| n).collect()
    };
    if targets.len() < cfg.targets {
        eprintln!(
            "warning: only {} competent targets (wanted {})",
            targets.len(),
            cfg.targets
        );
    }
    let hashes: Vec<String> = targets.iter().map(PolicyNet::content_hash).collect();
    let cmp = compare_modes(&targets, &cfg, root)?;
    for (t, h) in targets.iter().zip(&hashes) {
        if &t.content_hash() != h {
            return Err(Error::InvalidArgument("a target changed during attack runs".into()));
        }
    }
    let runs_dir = out.join("runs");
    let adv_dir = out.join("adversaries");
    for d in [&runs_dir, &adv_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for r in &cmp.runs {
        let name = format!("{}-t{:02}-s{}", r.result.mode, r.target, r.seed);
        write_text(&runs_dir.join(format!("{name}.csv")), &curve_csv(&r.result.curve))?;
        r.result.adversary.save(adv_dir.join(format!("{name}.ckpt")))?;
    }
    write_text(&out.join("curves.csv"), &cmp.curves_csv())?;
    write_text(&out.join("tests.csv"), &cmp.tests_csv())?;
    Ok(cmp)
}
