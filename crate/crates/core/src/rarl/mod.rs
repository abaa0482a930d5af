//! Robust training of a runner policy against an ensemble of action
//! adversaries, and robustness evaluation over shifted friction and mass.
//!
//! Training alternates blocks: one PPO iteration for the target (adversaries
//! frozen, one ensemble member drawn per episode), then one PPO iteration for
//! each adversary (target frozen, adversary reward `−r_tgt`). White-box
//! adversaries additionally see the target's action mean and last hidden
//! layer at the current step.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::envs::{make_shifted_env, multiplier_grid, ParamRunner, RUNNER_OBS_DIM};
use crate::harness::{
    curve_csv, mean, ppo_from_config, ppo_schema, sem, welch_t_one_sided, write_text, Config, Curve, SeedTree,
    WelchResult,
};
use crate::introspect::{IntrospectionMode, Introspector};
use crate::policy::{ForwardRecord, HeadKind, PolicyNet, PolicySpec};
use crate::ppo::{PpoConfig, PpoTrainer, RolloutSource, Transition};
use crate::{Error, Result, Rng64};

pub const ENSEMBLE_SIZE: usize = 3;

/// `clamp(a_tgt + δ·a_adv, −1, 1)` per coordinate.
pub fn perturb_action(a_tgt: &[f64], a_adv: &[f64], delta: f64) -> Vec<f64> {
    a_tgt
        .iter()
        .zip(a_adv)
        .map(|(t, a)| (t + delta * a).clamp(-1.0, 1.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RarlCondition {
    RlControl,
    Rarl,
    WbRarl,
}

impl RarlCondition {
    pub const ALL: [RarlCondition; 3] = [RarlCondition::RlControl, RarlCondition::Rarl, RarlCondition::WbRarl];

    pub fn name(self) -> &'static str {
        match self {
            RarlCondition::RlControl => "rl_control",
            RarlCondition::Rarl => "rarl",
            RarlCondition::WbRarl => "wb_rarl",
        }
    }

    /// What adversaries see of the target, if they exist at all.
    pub fn introspection(self) -> Option<IntrospectionMode> {
        match self {
            RarlCondition::RlControl => None,
            RarlCondition::Rarl => Some(IntrospectionMode::BlackBox),
            RarlCondition::WbRarl => Some(IntrospectionMode::ActionLatent),
        }
    }
}

impl std::fmt::Display for RarlCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RarlCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RarlCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown condition {s:?} (rl_control, rarl, wb_rarl)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RarlConfig {
    pub conditions: Vec<RarlCondition>,
    pub agents: usize,
    /// Target environment steps.
    pub steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub delta: f64,
    pub ensemble: usize,
    pub hidden: usize,
    pub adv_hidden: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_n: usize,
    pub normalize_m: bool,
    pub ppo: PpoConfig,
}

impl Default for RarlConfig {
    fn default() -> Self {
        Self {
            conditions: RarlCondition::ALL.to_vec(),
            agents: 10,
            steps: 100_000,
            eval_interval: 10_000,
            eval_episodes: 20,
            delta: 0.5,
            ensemble: ENSEMBLE_SIZE,
            hidden: 32,
            adv_hidden: 32,
            grid_lo: 0.6,
            grid_hi: 1.6,
            grid_n: 8,
            normalize_m: true,
            ppo: PpoConfig {
                steps_per_iter: 2000,
                minibatch_size: 250,
                entropy_coef: 0.0,
                ..PpoConfig::default()
            },
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RarlConfig {
    pub fn schema() -> Vec<(&'static str, String)> {
        let d = Self::default();
        let mut s = vec![
            ("rarl.conditions", join(&d.conditions)),
            ("rarl.agents", d.agents.to_string()),
            ("rarl.steps", d.steps.to_string()),
            ("rarl.eval_interval", d.eval_interval.to_string()),
            ("rarl.eval_episodes", d.eval_episodes.to_string()),
            ("rarl.delta", d.delta.to_string()),
            ("rarl.ensemble", d.ensemble.to_string()),
            ("rarl.hidden", d.hidden.to_string()),
            ("rarl.adv_hidden", d.adv_hidden.to_string()),
            ("rarl.grid_lo", d.grid_lo.to_string()),
            ("rarl.grid_hi", d.grid_hi.to_string()),
            ("rarl.grid_n", d.grid_n.to_string()),
            ("rarl.normalize_m", d.normalize_m.to_string()),
        ];
        s.extend(ppo_schema(&d.ppo));
        s
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        let cfg = Self {
            conditions: c.parse_list("rarl.conditions")?,
            agents: c.parse_key("rarl.agents")?,
            steps: c.parse_key("rarl.steps")?,
            eval_interval: c.parse_key("rarl.eval_interval")?,
            eval_episodes: c.parse_key("rarl.eval_episodes")?,
            delta: c.parse_key("rarl.delta")?,
            ensemble: c.parse_key("rarl.ensemble")?,
            hidden: c.parse_key("rarl.hidden")?,
            adv_hidden: c.parse_key("rarl.adv_hidden")?,
            grid_lo: c.parse_key("rarl.grid_lo")?,
            grid_hi: c.parse_key("rarl.grid_hi")?,
            grid_n: c.parse_key("rarl.grid_n")?,
            normalize_m: c.parse_key("rarl.normalize_m")?,
            ppo: ppo_from_config(c)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(format!("rarl: {m}")));
        let spi = self.ppo.steps_per_iter as u64;
        if self.eval_interval == 0 || !self.eval_interval.is_multiple_of(spi) || !self.steps.is_multiple_of(self.eval_interval) {
            return bad(format!(
                "eval_interval {} must be a multiple of steps_per_iter {spi} and divide steps {}",
                self.eval_interval, self.steps
            ));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return bad(format!("delta must be finite and non-negative, got {}", self.delta));
        }
        if !(self.grid_lo > 0.0 && self.grid_hi >= self.grid_lo) || self.grid_n == 0 {
            return bad("grid needs 0 < lo <= hi and at least one value".into());
        }
        if self.eval_episodes == 0 || self.conditions.is_empty() {
            return bad("need at least one eval episode and one condition".into());
        }
        Ok(())
    }

    pub fn multipliers(&self) -> Vec<f64> {
        multiplier_grid(self.grid_lo, self.grid_hi, self.grid_n)
    }

    fn ensemble_for(&self, condition: RarlCondition) -> usize {
        if condition == RarlCondition::RlControl {
            0
        } else {
            self.ensemble
        }
    }
}

/// One adversary with its private observation pipeline.
#[derive(Clone, Debug)]
pub struct Adversary {
    pub trainer: PpoTrainer,
    pub introspector: Introspector,
}

impl Adversary {
    fn observe(&mut self, base: &[f64], target_rec: &ForwardRecord) -> Result<Vec<f64>> {
        self.introspector.compose(base, target_rec)
    }
}

/// Adversary input width for a condition and target shape.
pub fn adversary_input_width(condition: RarlCondition, target: &PolicyNet) -> usize {
    let mode = condition.introspection().unwrap_or(IntrospectionMode::BlackBox);
    RUNNER_OBS_DIM + mode.width(target.action_dim(), target.latent_dim())
}

/// Target-side state that persists across blocks.
struct TargetSide {
    env: ParamRunner,
    select_rng: Rng64,
    act_rng: Rng64,
    active: Option<usize>,
    max_shift: f64,
}

impl TargetSide {
    fn pick(&mut self, ensemble: usize) {
        self.active = (ensemble > 0).then(|| self.select_rng.random_range(0..ensemble));
    }
}

/// Target rollouts with frozen adversaries, one drawn per episode.
struct TargetSource<'a> {
    side: &'a mut TargetSide,
    adversaries: &'a mut [Adversary],
    delta: f64,
}

impl RolloutSource for TargetSource<'_> {
    fn observation(&mut self) -> Result<Vec<f64>> {
        Ok(self.side.env.observe())
    }

    fn step(&mut self, record: &ForwardRecord) -> Result<Transition> {
        let side = &mut *self.side;
        let a_tgt = record.action.continuous();
        let exec = match side.active {
            Some(k) => {
                let adv = &mut self.adversaries[k];
                let obs = adv.observe(&side.env.observe(), record)?;
                let raw = adv.trainer.net.forward(&obs, &mut side.act_rng)?;
                let squashed: Vec<f64> = raw.action.continuous().iter().map(|x| x.tanh()).collect();
                perturb_action(a_tgt, &squashed, self.delta)
            }
            None => a_tgt.iter().map(|a| a.clamp(-1.0, 1.0)).collect(),
        };
        side.max_shift = side.max_shift.max((exec[0] - a_tgt[0].clamp(-1.0, 1.0)).abs());
        let (reward, done) = side.env.step(exec[0])?;
        if done {
            side.env.reset();
            side.pick(self.adversaries.len());
        }
        Ok(Transition { reward, done })
    }
}

/// Adversary rollouts against a frozen, stochastically acting target.
struct AdversarySource<'a> {
    env: &'a mut ParamRunner,
    target: &'a PolicyNet,
    introspector: &'a mut Introspector,
    delta: f64,
    target_rng: &'a mut Rng64,
    pending: Option<(Vec<f64>, ForwardRecord)>,
}

impl RolloutSource for AdversarySource<'_> {
    fn observation(&mut self) -> Result<Vec<f64>> {
        if let Some((obs, _)) = &self.pending {
            return Ok(obs.clone());
        }
        let base = self.env.observe();
        let rec = self.target.forward(&base, self.target_rng)?;
        let obs = self.introspector.compose(&base, &rec)?;
        self.pending = Some((obs.clone(), rec));
        Ok(obs)
    }

    fn step(&mut self, record: &ForwardRecord) -> Result<Transition> {
        if self.pending.is_none() {
            self.observation()?;
        }
        let (_, tgt) = self.pending.take().expect("cached above");
        let squashed: Vec<f64> = record.action.continuous().iter().map(|x| x.tanh()).collect();
        let exec = perturb_action(tgt.action.continuous(), &squashed, self.delta);
        let (reward, done) = self.env.step(exec[0])?;
        if done {
            self.env.reset();
        }
        Ok(Transition { reward: -reward, done })
    }
}

/// Mean deterministic adversary-free return over `episodes` on `env`.
pub fn evaluate_target(target: &PolicyNet, env: &ParamRunner, episodes: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut env = env.clone();
        env.reset();
        let mut total = 0.0;
        loop {
            let a = target.deterministic_action(&env.observe())?;
            let (r, done) = env.step(a.continuous()[0])?;
            total += r;
            if done {
                break;
            }
        }
        out.push(total);
    }
    Ok(out)
}

/// Deterministic target return with one frozen adversary acting (also deterministically).
pub fn evaluate_under_adversary(target: &PolicyNet, adversary: &Adversary, delta: f64) -> Result<f64> {
    let mut intro = adversary.introspector.clone();
    intro.training = false;
    let mut env = ParamRunner::nominal();
    let mut total = 0.0;
    loop {
        let base = env.observe();
        let rec = target.forward_deterministic(&base)?;
        let obs = intro.compose(&base, &rec)?;
        let raw = adversary.trainer.net.deterministic_action(&obs)?;
        let squashed: Vec<f64> = raw.continuous().iter().map(|x| x.tanh()).collect();
        let (r, done) = env.step(perturb_action(rec.action.continuous(), &squashed, delta)[0])?;
        total += r;
        if done {
            return Ok(total);
        }
    }
}

#[derive(Clone, Debug)]
pub struct RarlOutcome {
    pub condition: RarlCondition,
    pub target: PolicyNet,
    pub adversaries: Vec<Adversary>,
    /// Adversary-free mean return on the nominal runner.
    pub curve: Curve,
    /// Largest |executed − clamp(a_tgt)| seen during target blocks.
    pub max_perturbation: f64,
}

/// Alternating target / adversary training on the nominal runner.
pub fn rarl_train(condition: RarlCondition, cfg: &RarlConfig, seed: SeedTree) -> Result<RarlOutcome> {
    cfg.validate()?;
    let spec = PolicySpec::new(RUNNER_OBS_DIM, cfg.hidden, HeadKind::Gaussian(1));
    let target_net = PolicyNet::new(&spec, &mut seed.rng_for("init", 0))?;
    let mut target = PpoTrainer::new(target_net, cfg.ppo.clone())?;
    let mut target_rng = seed.rng_for("ppo", 0);
    let mode = condition.introspection().unwrap_or(IntrospectionMode::BlackBox);
    let adv_seed = seed.child("adversary", 0);
    let mut adversaries = (0..cfg.ensemble_for(condition))
        .map(|k| {
            let intro = Introspector::new(mode, &target.net, cfg.normalize_m);
            let width = adversary_input_width(condition, &target.net);
            let net = PolicyNet::new(
                &PolicySpec::new(width, cfg.adv_hidden, HeadKind::Gaussian(1)),
                &mut adv_seed.rng_for("init", k as u64),
            )?;
            Ok(Adversary {
                trainer: PpoTrainer::new(net, cfg.ppo.clone())?,
                introspector: intro,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut adv_ppo_rngs: Vec<Rng64> = (0..adversaries.len()).map(|k| adv_seed.rng_for("ppo", k as u64)).collect();
    let mut adv_envs: Vec<(ParamRunner, Rng64)> = (0..adversaries.len())
        .map(|k| (ParamRunner::nominal(), adv_seed.rng_for("target_act", k as u64)))
        .collect();

    let mut side = TargetSide {
        env: ParamRunner::nominal(),
        select_rng: seed.rng_for("select", 0),
        act_rng: adv_seed.rng_for("act", 0),
        active: None,
        max_shift: 0.0,
    };
    side.pick(adversaries.len());

    let nominal = ParamRunner::nominal();
    let mut curve = Curve {
        label: condition.name().to_string(),
        steps: vec![0],
        values: vec![mean(&evaluate_target(&target.net, &nominal, cfg.eval_episodes)?)],
    };
    let per_eval = cfg.eval_interval / cfg.ppo.steps_per_iter as u64;
    for it in 1..=cfg.steps / cfg.ppo.steps_per_iter as u64 {
        let adv_hashes: Vec<String> = adversaries.iter().map(|a| a.trainer.net.content_hash()).collect();
        for a in adversaries.iter_mut() {
            a.introspector.training = false;
        }
        let mut src = TargetSource {
            side: &mut side,
            adversaries: &mut adversaries,
            delta: cfg.delta,
        };
        target.train_iteration(&mut src, &mut target_rng)?;
        for (a, h) in adversaries.iter().zip(&adv_hashes) {
            if &a.trainer.net.content_hash() != h {
                return Err(Error::InvalidArgument("adversary changed during a target block".into()));
            }
        }
        let target_hash = target.net.content_hash();
        for (k, adv) in adversaries.iter_mut().enumerate() {
            adv.introspector.training = true;
            let (env, rng) = &mut adv_envs[k];
            let mut src = AdversarySource {
                env,
                target: &target.net,
                introspector: &mut adv.introspector,
                delta: cfg.delta,
                target_rng: rng,
                pending: None,
            };
            adv.trainer.train_iteration(&mut src, &mut adv_ppo_rngs[k])?;
        }
        if target.net.content_hash() != target_hash {
            return Err(Error::InvalidArgument("target changed during an adversary block".into()));
        }
        if it % per_eval == 0 {
            curve.steps.push(target.env_steps());
            curve.values.push(mean(&evaluate_target(&target.net, &nominal, cfg.eval_episodes)?));
        }
    }
    Ok(RarlOutcome {
        condition,
        target: target.net,
        adversaries,
        curve,
        max_perturbation: side.max_shift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub friction: f64,
    pub mass: f64,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Friction-major table of adversary-free returns.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    pub cells: Vec<GridCell>,
}

pub const GRID_HEADER: &str = "frictionMult,massMult,mean,sem,n";

impl GridTable {
    pub fn grid_mean(&self) -> f64 {
        mean(&self.cells.iter().map(|c| c.mean).collect::<Vec<_>>())
    }

    pub fn cell(&self, friction: f64, mass: f64) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.friction == friction && c.mass == mass)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{GRID_HEADER}\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{},{},{}", c.friction, c.mass, c.mean, c.sem, c.n);
        }
        s
    }
}

/// Evaluates a frozen target on every (friction, mass) pair of `multipliers`.
pub fn domain_shift_grid(target: &PolicyNet, multipliers: &[f64], episodes: usize) -> Result<GridTable> {
    let pairs: Vec<(f64, f64)> = multipliers
        .iter()
        .flat_map(|&f| multipliers.iter().map(move |&m| (f, m)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(f, m)| {
            let rs = evaluate_target(target, &make_shifted_env(f, m)?, episodes)?;
            Ok(GridCell {
                friction: f,
                mass: m,
                mean: mean(&rs),
                sem: sem(&rs).unwrap_or(f64::NAN),
                n: rs.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridTable { cells })
}

#[derive(Clone, Debug)]
pub struct AgentRecord {
    pub condition: RarlCondition,
    pub index: usize,
    pub seed: u64,
    pub final_eval: f64,
    /// 1-based rank by final evaluation within the condition.
    pub rank: usize,
    pub selected: bool,
    pub curve: Curve,
    pub grid: GridTable,
    pub target: PolicyNet,
}

#[derive(Clone, Debug)]
pub struct RarlStudy {
    pub multipliers: Vec<f64>,
    pub agents: Vec<AgentRecord>,
    /// `(name, result)` for wb_rarl>rl_control and wb_rarl>rarl on grid means.
    pub tests: Vec<(String, Option<WelchResult>)>,
}

/// Ranks by descending final evaluation, ties to the lower index; marks the top half.
pub fn select_top_half(final_evals: &[(usize, f64)]) -> Vec<(usize, usize, bool)> {
    let mut order: Vec<(usize, f64)> = final_evals.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep = order.len() / 2;
    let mut out: Vec<(usize, usize, bool)> =
        order.iter().enumerate().map(|(r, &(i, _))| (i, r + 1, r < keep)).collect();
    out.sort_by_key(|x| x.0);
    out
}

impl RarlStudy {
    pub fn selected(&self, condition: RarlCondition) -> impl Iterator<Item = &AgentRecord> {
        self.agents.iter().filter(move |a| a.condition == condition && a.selected)
    }

    pub fn grid_means(&self, condition: RarlCondition) -> Vec<f64> {
        self.selected(condition).map(|a| a.grid.grid_mean()).collect()
    }

    /// Mean over selected agents of each cell.
    pub fn aggregate(&self, condition: RarlCondition) -> Vec<GridCell> {
        let sel: Vec<&AgentRecord> = self.selected(condition).collect();
        let Some(first) = sel.first() else {
            return Vec::new();
        };
        first
            .grid
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let vs: Vec<f64> = sel.iter().map(|a| a.grid.cells[i].mean).collect();
                GridCell {
                    friction: c.friction,
                    mass: c.mass,
                    mean: mean(&vs),
                    sem: sem(&vs).unwrap_or(f64::NAN),
                    n: vs.len(),
                }
            })
            .collect()
    }

    /// Corners of the multiplier grid, friction-major.
    pub fn corners(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.multipliers[0], *self.multipliers.last().expect("non-empty grid"));
        vec![(lo, lo), (lo, hi), (hi, lo), (hi, hi)]
    }

    /// Fraction of selected agents of `condition` whose cell value is at
    /// least the selected control mean, per corner.
    pub fn corner_fractions(&self, condition: RarlCondition) -> Vec<((f64, f64), f64)> {
        let control = self.aggregate(RarlCondition::RlControl);
        self.corners()
            .into_iter()
            .map(|(f, m)| {
                let bar = control.iter().find(|c| c.friction == f && c.mass == m).map_or(f64::NAN, |c| c.mean);
                let sel: Vec<&AgentRecord> = self.selected(condition).collect();
                let hits = sel
                    .iter()
                    .filter(|a| a.grid.cell(f, m).is_some_and(|c| c.mean >= bar))
                    .count();
                ((f, m), hits as f64 / sel.len().max(1) as f64)
            })
            .collect()
    }
}

/// Trains `cfg.agents` agents per condition, keeps the better half of each,
/// and evaluates the survivors on the shift grid.
pub fn rarl_study(cfg: &RarlConfig, root: SeedTree) -> Result<RarlStudy> {
    cfg.validate()?;
    if cfg.agents / 2 < 2 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            got: cfg.agents,
        });
    }
    let multipliers = cfg.multipliers();
    let jobs: Vec<(RarlCondition, usize)> = cfg
        .conditions
        .iter()
        .flat_map(|&c| (0..cfg.agents).map(move |i| (c, i)))
        .collect();
    let outcomes: Vec<(RarlCondition, usize, u64, RarlOutcome)> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let s = root.child("agent", i as u64);
            rarl_train(c, cfg, s).map(|o| (c, i, s.seed(), o))
        })
        .collect::<Result<_>>()?;
    let mut agents = Vec::with_capacity(outcomes.len());
    for &cond in &cfg.conditions {
        let mine: Vec<&(RarlCondition, usize, u64, RarlOutcome)> =
            outcomes.iter().filter(|o| o.0 == cond).collect();
        let finals: Vec<(usize, f64)> = mine
            .iter()
            .map(|o| (o.1, *o.3.curve.values.last().expect("curve has the initial point")))
            .collect();
        for (i, rank, selected) in select_top_half(&finals) {
            let o = mine.iter().find(|o| o.1 == i).expect("every index ranked");
            let grid = if selected {
                domain_shift_grid(&o.3.target, &multipliers, cfg.eval_episodes)?
            } else {
                GridTable { cells: Vec::new() }
            };
            agents.push(AgentRecord {
                condition: cond,
                index: i,
                seed: o.2,
                final_eval: finals.iter().find(|f| f.0 == i).expect("ranked").1,
                rank,
                selected,
                curve: o.3.curve.clone(),
                grid,
                target: o.3.target.clone(),
            });
        }
    }
    let mut study = RarlStudy {
        multipliers,
        agents,
        tests: Vec::new(),
    };
    if cfg.conditions.contains(&RarlCondition::WbRarl) {
        let wb = study.grid_means(RarlCondition::WbRarl);
        for other in [RarlCondition::RlControl, RarlCondition::Rarl] {
            if cfg.conditions.contains(&other) {
                let w = welch_t_one_sided(&wb, &study.grid_means(other));
                study.tests.push((format!("wb_rarl>{}", other.name()), w.ok()));
            }
        }
    }
    Ok(study)
}

/// Full study with artifacts written into `out`.
pub fn run(c: &Config, out: &Path) -> Result<RarlStudy> {
    let cfg = RarlConfig::from_config(c)?;
    let root = SeedTree::new(c.seed()?).child("rarl", 0);
    let st = rarl_study(&cfg, root)?;
    let curves_dir = out.join("curves");
    let grids_dir = out.join("grids");
    let targets_dir = out.join("targets");
    for d in [&curves_dir, &grids_dir, &targets_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut selection = String::from("condition,agent,seed,final_eval,rank,selected,grid_csv\n");
    for a in &st.agents {
        let name = format!("{}-a{:02}", a.condition, a.index);
        write_text(&curves_dir.join(format!("{name}.csv")), &curve_csv(&a.curve))?;
        a.target.save(targets_dir.join(format!("{name}.ckpt")))?;
        let grid_path = if a.selected {
            let rel = format!("grids/{name}.csv");
            write_text(&out.join(&rel), &a.grid.to_csv())?;
            rel
        } else {
            String::new()
        };
        let _ = writeln!(
            selection,
            "{},{},{},{},{},{},{}",
            a.condition, a.index, a.seed, a.final_eval, a.rank, a.selected, grid_path
        );
    }
    write_text(&out.join("selection.csv"), &selection)?;
    let mut report = format!("condition,{GRID_HEADER}\n");
    for &cond in &cfg.conditions {
        for c in st.aggregate(cond) {
            let _ = writeln!(report, "{cond},{},{},{},{},{}", c.friction, c.mass, c.mean, c.sem, c.n);
        }
    }
    write_text(&out.join("report.csv"), &report)?;
    let mut tests = String::from("comparison,mean_a,mean_b,t,df,p\n");
    for (name, w) in &st.tests {
        let other: RarlCondition = name.trim_start_matches("wb_rarl>").parse()?;
        let (t, df, p) = w.map_or((f64::NAN, f64::NAN, f64::NAN), |w| (w.t, w.df, w.p));
        let _ = writeln!(
            tests,
            "{name},{},{},{t},{df},{p}",
            mean(&st.grid_means(RarlCondition::WbRarl)),
            mean(&st.grid_means(other))
        );
    }
    write_text(&out.join("tests.csv"), &tests)?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> RarlConfig {
        RarlConfig {
            agents: 4,
            steps: 800,
            eval_interval: 400,
            eval_episodes: 2,
            grid_n: 2,
            hidden: 8,
            adv_hidden: 8,
            ppo: PpoConfig {
                steps_per_iter: 200,
                minibatch_size: 100,
                epochs: 2,
                ..RarlConfig::default().ppo
            },
            ..RarlConfig::default()
        }
    }

    #[test]
    fn perturbation_examples() {
        assert_eq!(perturb_action(&[0.8], &[1.0], 0.5), vec![1.0]);
        assert_eq!(perturb_action(&[0.3], &[0.0], 0.5), vec![0.3]);
        assert_eq!(perturb_action(&[1.7], &[0.0], 0.5), vec![1.0]);
        assert_eq!(perturb_action(&[0.2], &[-1.0], 0.5), vec![-0.3]);
    }

    proptest! {
        #[test]
        fn perturbation_is_delta_bounded(t in -3.0f64..3.0, a in -1.0f64..1.0, d in 0.0f64..2.0) {
            let e = perturb_action(&[t], &[a], d)[0];
            prop_assert!((e - t.clamp(-1.0, 1.0)).abs() <= d + 1e-15);
            prop_assert!((-1.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn white_box_width() {
        let t = PolicyNet::new(&PolicySpec::new(3, 32, HeadKind::Gaussian(1)), &mut SeedTree::new(0).rng()).unwrap();
        assert_eq!(adversary_input_width(RarlCondition::WbRarl, &t), 3 + 1 + 32);
        assert_eq!(adversary_input_width(RarlCondition::Rarl, &t), 3);
    }

    #[test]
    fn control_matches_plain_ppo() {
        let cfg = small();
        let seed = SeedTree::new(5);
        let control = rarl_train(RarlCondition::RlControl, &cfg, seed).unwrap();
        let spec = PolicySpec::new(RUNNER_OBS_DIM, cfg.hidden, HeadKind::Gaussian(1));
        let mut plain = PpoTrainer::new(PolicyNet::new(&spec, &mut seed.rng_for("init", 0)).unwrap(), cfg.ppo.clone()).unwrap();
        let mut rng = seed.rng_for("ppo", 0);
        let mut env = PlainRunner(ParamRunner::nominal());
        for _ in 0..4 {
            plain.train_iteration(&mut env, &mut rng).unwrap();
        }
        assert_eq!(control.target, plain.net);
        let zero = rarl_train(RarlCondition::Rarl, &RarlConfig { delta: 0.0, ..cfg }, seed).unwrap();
        assert_eq!((&zero.curve.steps, &zero.curve.values), (&control.curve.steps, &control.curve.values));
        assert_eq!(zero.target, control.target);
        assert_eq!(zero.max_perturbation, 0.0);
    }

    struct PlainRunner(ParamRunner);

    impl RolloutSource for PlainRunner {
        fn observation(&mut self) -> Result<Vec<f64>> {
            Ok(self.0.observe())
        }

        fn step(&mut self, r: &ForwardRecord) -> Result<Transition> {
            let (reward, done) = self.0.step(r.action.continuous()[0])?;
            if done {
                self.0.reset();
            }
            Ok(Transition { reward, done })
        }
    }

    #[test]
    fn perturbations_stay_within_delta() {
        let o = rarl_train(RarlCondition::WbRarl, &small(), SeedTree::new(2)).unwrap();
        assert!(o.max_perturbation <= 0.5 + 1e-12);
        assert!(o.max_perturbation > 0.0);
        assert_eq!(o.adversaries.len(), 3);
    }

    #[test]
    fn selection_breaks_ties_by_index() {
        let sel = select_top_half(&[(0, 1.0), (1, 3.0), (2, 3.0), (3, 0.5)]);
        assert_eq!(sel, vec![(0, 3, false), (1, 1, true), (2, 2, true), (3, 4, false)]);
    }

    #[test]
    fn grid_shape_and_nominal_cell() {
        let t = PolicyNet::new(&PolicySpec::new(3, 8, HeadKind::Gaussian(1)), &mut SeedTree::new(1).rng()).unwrap();
        let g = domain_shift_grid(&t, &multiplier_grid(0.6, 1.6, 8), 2).unwrap();
        assert_eq!(g.cells.len(), 64);
        assert_eq!(g.to_csv().lines().count(), 65);
        let nominal = domain_shift_grid(&t, &[1.0], 3).unwrap();
        let direct = mean(&evaluate_target(&t, &ParamRunner::nominal(), 1).unwrap());
        assert_eq!(nominal.cells[0].mean, direct);
    }

    #[test]
    fn study_runs_and_reports() {
        let st = rarl_study(&small(), SeedTree::new(9)).unwrap();
        assert_eq!(st.agents.len(), 12);
        assert_eq!(st.selected(RarlCondition::Rarl).count(), 2);
        assert_eq!(st.tests.len(), 2);
        assert_eq!(st.corner_fractions(RarlCondition::WbRarl).len(), 4);
    }
}
