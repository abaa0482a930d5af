//! Latent-space attacks on a frozen [`TinyLm`].
//!
//! Each episode is one decision. A prompt is sampled by letting the model
//! continue a random seed token; the adversary observes the prompt's mean
//! token embedding (plus, in white-box mode, the hooked layer's residual at
//! the last prompt position) and emits one perturbation vector. That vector,
//! squashed and scaled, is added to the hooked residual stream at every
//! prompt position while the model samples a completion. The reward is the
//! fraction of completion tokens that fall in a forbidden set.

mod tinylm;

pub use tinylm::{detokenize, Hook, KvCache, TinyLm, TinyLmConfig, SYMBOLS};

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::harness::{
    aggregate_curves, curve_csv, labelled_points_csv, mean, ppo_from_config, ppo_schema, welch_t_one_sided, write_text,
    Config, Curve, CurvePoint, SeedTree, WelchResult,
};
use crate::numkit::{sample_categorical, softmax, RunningMoments};
use crate::policy::{ForwardRecord, HeadKind, PolicyNet, PolicySpec};
use crate::ppo::{PpoConfig, PpoTrainer, RolloutSource, Transition};
use crate::{Error, Result, Rng64};

/// Clip applied to normalized adversary observations.
const OBS_CLIP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LmAttackConfig {
    pub model: TinyLmConfig,
    pub prompt_len: usize,
    pub completion_len: usize,
    pub forbidden: Vec<usize>,
    pub alpha: f64,
    pub temperature: f64,
    /// Training budget in episodes.
    pub episodes: u64,
    pub eval_interval: u64,
    pub eval_prompts: usize,
    pub hidden: usize,
    pub seeds: usize,
    /// Which observation arms to train: black box, white box or both.
    pub arms: Vec<Arm>,
    pub normalize_obs: bool,
    /// Budget fraction for the headline white-box vs black-box test.
    pub test_fraction: f64,
    pub ppo: PpoConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arm {
    BlackBox,
    WhiteBox,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::BlackBox => "black_box",
            Arm::WhiteBox => "white_box",
        }
    }

    pub fn is_white_box(self) -> bool {
        self == Arm::WhiteBox
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "black_box" => Ok(Arm::BlackBox),
            "white_box" => Ok(Arm::WhiteBox),
            _ => Err(Error::InvalidArgument(format!("unknown arm {s:?} (black_box, white_box)"))),
        }
    }
}

impl Default for LmAttackConfig {
    fn default() -> Self {
        Self {
            model: TinyLmConfig::default(),
            prompt_len: 10,
            completion_len: 15,
            forbidden: vec![7, 19, 42, 55],
            alpha: 3.0,
            temperature: 1.0,
            episodes: 20_000,
            eval_interval: 2_000,
            eval_prompts: 200,
            hidden: 32,
            seeds: 9,
            arms: vec![Arm::BlackBox, Arm::WhiteBox],
            normalize_obs: true,
            test_fraction: 0.6,
            ppo: PpoConfig {
                steps_per_iter: 200,
                minibatch_size: 50,
                lr: 2e-3,
                entropy_coef: 0.0,
                ..PpoConfig::default()
            },
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl LmAttackConfig {
    pub fn schema() -> Vec<(&'static str, String)> {
        let d = Self::default();
        let mut s = vec![
            ("lmattack.model_seed", d.model.seed.to_string()),
            ("lmattack.hook_layer", d.model.hook_layer.to_string()),
            ("lmattack.logit_scale", d.model.logit_scale.to_string()),
            ("lmattack.prompt_len", d.prompt_len.to_string()),
            ("lmattack.completion_len", d.completion_len.to_string()),
            ("lmattack.forbidden", join(&d.forbidden)),
            ("lmattack.alpha", d.alpha.to_string()),
            ("lmattack.temperature", d.temperature.to_string()),
            ("lmattack.episodes", d.episodes.to_string()),
            ("lmattack.eval_interval", d.eval_interval.to_string()),
            ("lmattack.eval_prompts", d.eval_prompts.to_string()),
            ("lmattack.hidden", d.hidden.to_string()),
            ("lmattack.seeds", d.seeds.to_string()),
            ("lmattack.arms", join(&d.arms)),
            ("lmattack.normalize_obs", d.normalize_obs.to_string()),
            ("lmattack.test_fraction", d.test_fraction.to_string()),
        ];
        s.extend(ppo_schema(&d.ppo));
        s
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        let cfg = Self {
            model: TinyLmConfig {
                seed: c.parse_key("lmattack.model_seed")?,
                hook_layer: c.parse_key("lmattack.hook_layer")?,
                logit_scale: c.parse_key("lmattack.logit_scale")?,
                ..TinyLmConfig::default()
            },
            prompt_len: c.parse_key("lmattack.prompt_len")?,
            completion_len: c.parse_key("lmattack.completion_len")?,
            forbidden: c.parse_list("lmattack.forbidden")?,
            alpha: c.parse_key("lmattack.alpha")?,
            temperature: c.parse_key("lmattack.temperature")?,
            episodes: c.parse_key("lmattack.episodes")?,
            eval_interval: c.parse_key("lmattack.eval_interval")?,
            eval_prompts: c.parse_key("lmattack.eval_prompts")?,
            hidden: c.parse_key("lmattack.hidden")?,
            seeds: c.parse_key("lmattack.seeds")?,
            arms: c.parse_list("lmattack.arms")?,
            normalize_obs: c.parse_key("lmattack.normalize_obs")?,
            test_fraction: c.parse_key("lmattack.test_fraction")?,
            ppo: ppo_from_config(c)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(format!("lmattack: {m}")));
        let spi = self.ppo.steps_per_iter as u64;
        if self.eval_interval == 0 || !self.eval_interval.is_multiple_of(spi) || !self.episodes.is_multiple_of(self.eval_interval) {
            return bad(format!(
                "eval_interval {} must be a multiple of steps_per_iter {spi} and divide episodes {}",
                self.eval_interval, self.episodes
            ));
        }
        if self.prompt_len == 0 || self.completion_len == 0 {
            return bad("prompt and completion lengths must be positive".into());
        }
        if self.prompt_len + self.completion_len > self.model.context {
            return bad(format!("prompt + completion exceed context {}", self.model.context));
        }
        if let Some(t) = self.forbidden.iter().find(|&&t| t >= self.model.vocab) {
            return bad(format!("forbidden token {t} outside vocabulary"));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 || self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad("alpha must be non-negative and temperature positive".into());
        }
        if self.arms.is_empty() || self.eval_prompts == 0 {
            return bad("need at least one arm and one eval prompt".into());
        }
        Ok(())
    }

    pub fn eval_steps(&self) -> Vec<u64> {
        (0..=self.episodes / self.eval_interval).map(|k| k * self.eval_interval).collect()
    }

    /// Grid point at (or just below) `test_fraction` of the budget.
    pub fn test_step(&self) -> u64 {
        let raw = (self.test_fraction * self.episodes as f64).round() as u64;
        raw / self.eval_interval * self.eval_interval
    }

    pub fn obs_dim(&self, arm: Arm) -> usize {
        if arm.is_white_box() {
            2 * self.model.d_model
        } else {
            self.model.d_model
        }
    }
}

/// Fraction of completion tokens in the forbidden set.
pub fn forbidden_reward(completion: &[usize], forbidden: &[usize]) -> f64 {
    if completion.is_empty() {
        return 0.0;
    }
    completion.iter().filter(|t| forbidden.contains(t)).count() as f64 / completion.len() as f64
}

/// `tanh(raw) · α · latent_scale`, coordinate-wise.
pub fn perturbation_from_action(raw: &[f64], alpha: f64, latent_scale: f64) -> Vec<f64> {
    raw.iter().map(|r| r.tanh() * alpha * latent_scale).collect()
}

/// Running root-mean-square of scalar samples; 1.0 before any sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningRms {
    sum_sq: f64,
    count: u64,
}

impl RunningRms {
    pub fn update(&mut self, xs: &[f64]) {
        self.sum_sq += xs.iter().map(|x| x * x).sum::<f64>();
        self.count += xs.len() as u64;
    }

    pub fn rms(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            (self.sum_sq / self.count as f64).sqrt()
        }
    }
}

/// A prompt with what each observer sees of it.
#[derive(Clone, Debug, PartialEq)]
pub struct Prompt {
    pub tokens: Vec<usize>,
    /// Mean token embedding.
    pub encoding: Vec<f64>,
    /// Hooked-layer residual at the last prompt position.
    pub latent: Vec<f64>,
    /// Hooked-layer residuals at every prompt position, unperturbed.
    pub hooked_states: Vec<Vec<f64>>,
}

/// Samples a prompt by unperturbed continuation of a uniformly drawn seed token.
pub fn sample_prompt<R: Rng + ?Sized>(model: &TinyLm, len: usize, temperature: f64, rng: &mut R) -> Result<Prompt> {
    let layer = model.config().hook_layer;
    let mut tokens = vec![rng.random_range(0..model.config().vocab)];
    let mut cache = model.new_cache();
    let mut hooked_states = Vec::with_capacity(len);
    loop {
        let (states, logits) = model.step(*tokens.last().expect("non-empty"), &mut cache, None)?;
        hooked_states.push(states[layer].clone());
        if tokens.len() == len {
            break;
        }
        let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
        tokens.push(sample_categorical(&softmax(&scaled), rng));
    }
    let d = model.d_model();
    let mut encoding = vec![0.0; d];
    for &t in &tokens {
        for (e, v) in encoding.iter_mut().zip(model.token_embedding(t)) {
            *e += v / len as f64;
        }
    }
    Ok(Prompt {
        latent: hooked_states[len - 1].clone(),
        tokens,
        encoding,
        hooked_states,
    })
}

/// One completed attack episode.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackEpisode {
    pub prompt: Vec<usize>,
    pub perturbation: Vec<f64>,
    pub completion: Vec<usize>,
    pub reward: f64,
}

/// Adversary-side state shared by training and evaluation: observation
/// statistics and the latent scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Observer {
    pub arm: Arm,
    pub normalize: bool,
    pub training: bool,
    stats: RunningMoments,
    scale: RunningRms,
}

impl Observer {
    pub fn new(arm: Arm, cfg: &LmAttackConfig) -> Self {
        Self {
            arm,
            normalize: cfg.normalize_obs,
            training: true,
            stats: RunningMoments::new(cfg.obs_dim(arm)),
            scale: RunningRms::default(),
        }
    }

    pub fn latent_scale(&self) -> f64 {
        self.scale.rms()
    }

    /// Observation for `prompt`; updates statistics while training.
    pub fn observe(&mut self, prompt: &Prompt) -> Vec<f64> {
        let mut obs = prompt.encoding.clone();
        if self.arm.is_white_box() {
            obs.extend_from_slice(&prompt.latent);
        }
        if self.training {
            for s in &prompt.hooked_states {
                self.scale.update(s);
            }
        }
        if !self.normalize {
            return obs;
        }
        if self.training {
            self.stats.update(&obs);
        }
        self.stats.normalize(&obs, OBS_CLIP)
    }
}

/// Runs the perturbed model on `prompt` and scores the completion.
pub fn attack_episode<R: Rng + ?Sized>(
    model: &TinyLm,
    cfg: &LmAttackConfig,
    prompt: &[usize],
    perturbation: &[f64],
    rng: &mut R,
) -> Result<AttackEpisode> {
    let hook = Hook {
        delta: perturbation,
        positions: prompt.len(),
    };
    let completion = model.generate(prompt, Some(hook), cfg.completion_len, cfg.temperature, rng)?;
    Ok(AttackEpisode {
        prompt: prompt.to_vec(),
        perturbation: perturbation.to_vec(),
        reward: forbidden_reward(&completion, &cfg.forbidden),
        completion,
    })
}

/// One-step episodes as a PPO rollout source.
pub struct LatentAttackSource<'a> {
    model: &'a TinyLm,
    cfg: &'a LmAttackConfig,
    observer: Observer,
    prompt_rng: Rng64,
    gen_rng: Rng64,
    pending: Option<(Prompt, Vec<f64>)>,
    pub last_episode: Option<AttackEpisode>,
}

impl<'a> LatentAttackSource<'a> {
    pub fn new(model: &'a TinyLm, cfg: &'a LmAttackConfig, arm: Arm, seed: SeedTree) -> Self {
        Self {
            model,
            cfg,
            observer: Observer::new(arm, cfg),
            prompt_rng: seed.rng_for("prompts", 0),
            gen_rng: seed.rng_for("generation", 0),
            pending: None,
            last_episode: None,
        }
    }

    pub fn observer(&self) -> &Observer {
        &self.observer
    }
}

impl RolloutSource for LatentAttackSource<'_> {
    fn observation(&mut self) -> Result<Vec<f64>> {
        if let Some((_, obs)) = &self.pending {
            return Ok(obs.clone());
        }
        let prompt = sample_prompt(self.model, self.cfg.prompt_len, self.cfg.temperature, &mut self.prompt_rng)?;
        let obs = self.observer.observe(&prompt);
        self.pending = Some((prompt, obs.clone()));
        Ok(obs)
    }

    fn step(&mut self, record: &ForwardRecord) -> Result<Transition> {
        if self.pending.is_none() {
            self.observation()?;
        }
        let (prompt, _) = self.pending.take().expect("cached above");
        let delta = perturbation_from_action(record.action.continuous(), self.cfg.alpha, self.observer.latent_scale());
        let ep = attack_episode(self.model, self.cfg, &prompt.tokens, &delta, &mut self.gen_rng)?;
        let reward = ep.reward;
        self.last_episode = Some(ep);
        Ok(Transition { reward, done: true })
    }
}

/// Fixed held-out prompts plus per-prompt generation seeds, shared by every
/// evaluation so that all adversaries face identical conditions.
#[derive(Clone, Debug)]
pub struct HeldOut {
    pub prompts: Vec<Prompt>,
    seed: SeedTree,
}

impl HeldOut {
    pub fn new(model: &TinyLm, cfg: &LmAttackConfig, seed: SeedTree) -> Result<Self> {
        let mut rng = seed.rng_for("prompts", 0);
        let prompts = (0..cfg.eval_prompts)
            .map(|_| sample_prompt(model, cfg.prompt_len, cfg.temperature, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Self { prompts, seed })
    }

    /// Episodes under `perturb(prompt index, prompt)`.
    pub fn run<F>(&self, model: &TinyLm, cfg: &LmAttackConfig, mut perturb: F) -> Result<Vec<AttackEpisode>>
    where
        F: FnMut(usize, &Prompt) -> Result<Vec<f64>>,
    {
        self.prompts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let delta = perturb(i, p)?;
                attack_episode(model, cfg, &p.tokens, &delta, &mut self.seed.rng_for("generation", i as u64))
            })
            .collect()
    }

    /// Mean reward of the unperturbed model.
    pub fn base_rate(&self, model: &TinyLm, cfg: &LmAttackConfig) -> Result<f64> {
        let zero = vec![0.0; model.d_model()];
        let eps = self.run(model, cfg, |_, _| Ok(zero.clone()))?;
        Ok(mean(&eps.iter().map(|e| e.reward).collect::<Vec<_>>()))
    }

    /// Deterministic adversary episodes with frozen observer statistics.
    pub fn evaluate(
        &self,
        model: &TinyLm,
        cfg: &LmAttackConfig,
        adversary: &PolicyNet,
        observer: &Observer,
    ) -> Result<Vec<AttackEpisode>> {
        let mut obs = observer.clone();
        obs.training = false;
        let scale = obs.latent_scale();
        self.run(model, cfg, |_, p| {
            let a = adversary.deterministic_action(&obs.observe(p))?;
            Ok(perturbation_from_action(a.continuous(), cfg.alpha, scale))
        })
    }
}

fn mean_reward(eps: &[AttackEpisode]) -> f64 {
    mean(&eps.iter().map(|e| e.reward).collect::<Vec<_>>())
}

#[derive(Clone, Debug)]
pub struct LmRunResult {
    pub arm: Arm,
    pub curve: Curve,
    pub adversary: PolicyNet,
    pub observer: Observer,
    /// Final held-out episodes, for inspection.
    pub final_episodes: Vec<AttackEpisode>,
}

/// Trains one latent adversary with PPO over one-step episodes.
pub fn train_latent_adversary(
    model: &TinyLm,
    arm: Arm,
    cfg: &LmAttackConfig,
    held_out: &HeldOut,
    seed: SeedTree,
) -> Result<LmRunResult> {
    cfg.validate()?;
    let spec = PolicySpec::new(cfg.obs_dim(arm), cfg.hidden, HeadKind::Gaussian(model.d_model()));
    let net = PolicyNet::new(&spec, &mut seed.rng_for("init", 0))?;
    let mut trainer = PpoTrainer::new(net, cfg.ppo.clone())?;
    let mut source = LatentAttackSource::new(model, cfg, arm, seed);
    let mut ppo_rng = seed.rng_for("ppo", 0);
    let per_eval = cfg.eval_interval / cfg.ppo.steps_per_iter as u64;
    let mut curve = Curve {
        label: arm.name().to_string(),
        steps: vec![0],
        values: vec![mean_reward(&held_out.evaluate(model, cfg, &trainer.net, source.observer())?)],
    };
    let mut final_episodes = Vec::new();
    for it in 1..=cfg.episodes / cfg.ppo.steps_per_iter as u64 {
        trainer.train_iteration(&mut source, &mut ppo_rng)?;
        if it % per_eval == 0 {
            final_episodes = held_out.evaluate(model, cfg, &trainer.net, source.observer())?;
            curve.steps.push(trainer.env_steps());
            curve.values.push(mean_reward(&final_episodes));
        }
    }
    Ok(LmRunResult {
        arm,
        curve,
        adversary: trainer.net,
        observer: source.observer,
        final_episodes,
    })
}

#[derive(Clone, Debug)]
pub struct LmStudy {
    pub base_rate: f64,
    pub model_hash: String,
    pub runs: Vec<(usize, LmRunResult)>,
    pub curves: Vec<(Arm, Vec<CurvePoint>)>,
    /// White box vs black box at the test step and at the end.
    pub tests: Vec<(&'static str, u64, Option<WelchResult>)>,
}

impl LmStudy {
    pub fn values_at(&self, arm: Arm, step: u64) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|(_, r)| r.arm == arm)
            .filter_map(|(_, r)| r.curve.at(step))
            .collect()
    }
}

/// Trains `cfg.seeds` adversaries per arm on one frozen model.
pub fn study(cfg: &LmAttackConfig, root: SeedTree) -> Result<LmStudy> {
    cfg.validate()?;
    let model = TinyLm::new(cfg.model.clone())?;
    let model_hash = model.parameter_hash();
    let held_out = HeldOut::new(&model, cfg, root.child("held_out", 0))?;
    let base_rate = held_out.base_rate(&model, cfg)?;
    let jobs: Vec<(usize, Arm)> = (0..cfg.seeds).flat_map(|s| cfg.arms.iter().map(move |&a| (s, a))).collect();
    let runs: Vec<(usize, LmRunResult)> = jobs
        .par_iter()
        .map(|&(s, arm)| {
            train_latent_adversary(&model, arm, cfg, &held_out, root.child("seed", s as u64)).map(|r| (s, r))
        })
        .collect::<Result<_>>()?;
    if model.parameter_hash() != model_hash {
        return Err(Error::InvalidArgument("tinylm parameters changed during the study".into()));
    }
    let mut curves = Vec::new();
    for &arm in &cfg.arms {
        let cs: Vec<Curve> = runs.iter().filter(|(_, r)| r.arm == arm).map(|(_, r)| r.curve.clone()).collect();
        curves.push((arm, aggregate_curves(&cs)?));
    }
    let mut out = LmStudy {
        base_rate,
        model_hash,
        runs,
        curves,
        tests: Vec::new(),
    };
    if cfg.arms.contains(&Arm::WhiteBox) && cfg.arms.contains(&Arm::BlackBox) {
        for (label, step) in [("test_fraction", cfg.test_step()), ("final", cfg.episodes)] {
            let w = welch_t_one_sided(&out.values_at(Arm::WhiteBox, step), &out.values_at(Arm::BlackBox, step));
            if let Err(e) = &w {
                eprintln!("warning: skipping white_box vs black_box at {label}: {e}");
            }
            out.tests.push((label, step, w.ok()));
        }
    }
    Ok(out)
}

/// Full experiment with artifacts written into `out`.
pub fn run(c: &Config, out: &Path) -> Result<LmStudy> {
    let cfg = LmAttackConfig::from_config(c)?;
    let root = SeedTree::new(c.seed()?).child("lmattack", 0);
    let st = study(&cfg, root)?;
    let runs_dir = out.join("runs");
    let adv_dir = out.join("adversaries");
    for d in [&runs_dir, &adv_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut completions = String::new();
    for (s, r) in &st.runs {
        let name = format!("{}-s{s}", r.arm);
        write_text(&runs_dir.join(format!("{name}.csv")), &curve_csv(&r.curve))?;
        r.adversary.save(adv_dir.join(format!("{name}.ckpt")))?;
        let _ = writeln!(completions, "# {name}");
        for e in r.final_episodes.iter().take(5) {
            let _ = writeln!(
                completions,
                "{:?} {:?} | {} | {} | reward {}",
                e.prompt,
                e.completion,
                detokenize(&e.prompt),
                detokenize(&e.completion),
                e.reward
            );
        }
    }
    write_text(&out.join("completions.txt"), &completions)?;
    let series: Vec<(String, Vec<CurvePoint>)> =
        st.curves.iter().map(|(a, p)| (a.name().to_string(), p.clone())).collect();
    write_text(&out.join("curves.csv"), &labelled_points_csv("arm", &series))?;
    let mut tests = String::from("comparison,checkpoint,env_steps,base_rate,t,df,p\n");
    for (label, step, w) in &st.tests {
        let (t, df, p) = w.map_or((f64::NAN, f64::NAN, f64::NAN), |w| (w.t, w.df, w.p));
        let _ = writeln!(tests, "white_box>black_box,{label},{step},{},{t},{df},{p}", st.base_rate);
    }
    write_text(&out.join("tests.csv"), &tests)?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LmAttackConfig {
        LmAttackConfig {
            episodes: 40,
            eval_interval: 20,
            eval_prompts: 6,
            seeds: 2,
            ppo: PpoConfig {
                steps_per_iter: 20,
                minibatch_size: 10,
                epochs: 1,
                ..LmAttackConfig::default().ppo
            },
            ..LmAttackConfig::default()
        }
    }

    #[test]
    fn reward_rule() {
        let f = [7, 19, 42, 55];
        let mut c = vec![0; 15];
        c[2] = 7;
        c[9] = 42;
        c[14] = 42;
        assert!((forbidden_reward(&c, &f) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn perturbation_bounds() {
        assert_eq!(perturbation_from_action(&[0.0, 0.0], 3.0, 2.0), vec![0.0, 0.0]);
        let p = perturbation_from_action(&[1e6, -1e6], 3.0, 2.0);
        assert_eq!(p, vec![6.0, -6.0]);
        assert_eq!(perturbation_from_action(&[5.0], 0.0, 2.0), vec![0.0]);
    }

    #[test]
    fn observation_widths() {
        let cfg = LmAttackConfig::default();
        assert_eq!(cfg.obs_dim(Arm::WhiteBox), 64);
        assert_eq!(cfg.obs_dim(Arm::BlackBox), 32);
        assert_eq!(cfg.test_step(), 12_000);
    }

    #[test]
    fn zero_adversary_scores_base_rate() {
        let cfg = tiny();
        let model = TinyLm::new(cfg.model.clone()).unwrap();
        let held = HeldOut::new(&model, &cfg, SeedTree::new(1)).unwrap();
        let mut net = PolicyNet::new(
            &PolicySpec::new(32, 8, HeadKind::Gaussian(32)),
            &mut SeedTree::new(2).rng(),
        )
        .unwrap();
        net.zero_output_heads();
        let obs = Observer::new(Arm::BlackBox, &cfg);
        let eps = held.evaluate(&model, &cfg, &net, &obs).unwrap();
        assert_eq!(mean_reward(&eps), held.base_rate(&model, &cfg).unwrap());
    }

    #[test]
    fn gamma_is_irrelevant_for_one_step_episodes() {
        let base = tiny();
        let model = TinyLm::new(base.model.clone()).unwrap();
        let held = HeldOut::new(&model, &base, SeedTree::new(1)).unwrap();
        let run = |gamma: f64| {
            let cfg = LmAttackConfig {
                ppo: PpoConfig { gamma, ..base.ppo.clone() },
                ..base.clone()
            };
            train_latent_adversary(&model, Arm::WhiteBox, &cfg, &held, SeedTree::new(3)).unwrap()
        };
        let (a, b) = (run(0.0), run(0.99));
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.adversary, b.adversary);
    }

    #[test]
    fn study_reports_tests() {
        let st = study(&tiny(), SeedTree::new(4)).unwrap();
        assert_eq!(st.runs.len(), 4);
        assert_eq!(st.tests.len(), 2);
        assert!(st.base_rate >= 0.0 && st.base_rate <= 1.0);
    }
}
