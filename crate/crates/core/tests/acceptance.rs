//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines always reach stdout. Set
//! `ADVPOL_ACCEPTANCE=1,2,3` to run a subset; the default runs all eight,
//! which takes on the order of an hour or more on one core.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use advpol::attack2p::{compare_modes, evaluate_match, pretrain_pool, Attack2pConfig, Opponent};
use advpol::envs::{make_shifted_env, MiniSoccer, Move, Side};
use advpol::harness::{mean, run_experiment, welch_t_one_sided, Config, SeedTree, MANIFEST_FILE, OUT_DIR_KEY};
use advpol::introspect::IntrospectionMode;
use advpol::lmattack::{study, Arm, LmAttackConfig};
use advpol::numkit::{finite_difference, max_relative_error, Activation, Dense, Matrix, MlpParams, Params};
use advpol::policy::{ForwardRecord, HeadKind, PolicyNet, PolicySpec};
use advpol::ppo::{compute_gae, ppo_loss, PpoConfig, PpoTrainer, RolloutBatch, RolloutSource, Transition};
use advpol::rarl::{perturb_action, rarl_study, RarlCondition, RarlConfig};
use advpol::Rng64;
use rand::{Rng, SeedableRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. numerical core

/// (a, b, t, df, p) for H1: mean(a) > mean(b), computed with scipy
/// (`ttest_ind(a, b, equal_var=False, alternative="greater")`) before the
/// build and frozen here.
#[allow(clippy::type_complexity)]
fn welch_oracle() -> Vec<(Vec<f64>, Vec<f64>, f64, f64, f64)> {
    vec![
        (vec![1.1, 1.2, 1.3], vec![0.1, 0.2, 0.3], 12.24744871391589, 3.9999999999999996, 0.0001276083747209634),
        (vec![0.5, 1.5, 2.0, 3.1], vec![0.2, 0.9, 1.1], 1.7200930031266957, 4.303972225150116, 0.07772735181982941),
        (
            vec![2.0, 2.5, 1.5, 3.0, 2.2],
            vec![2.1, 2.4, 1.9, 2.6, 2.3],
            -0.07198157507487112,
            5.7695599140351215,
            0.5274766893780218,
        ),
        (
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.5, 0.4, 0.6, 0.5, 0.55],
            -0.034414624275084925,
            3.0793203144213117,
            0.5126718101433264,
        ),
        (
            vec![-1.0, -2.0, -1.5],
            vec![-1.2, -0.8, -1.0, -1.4],
            -1.2649110640673513,
            2.805194805194805,
            0.8496140324512244,
        ),
        (
            vec![10.0, 12.0, 9.5, 11.0, 13.0, 10.5],
            vec![9.0, 9.5, 8.0, 10.0, 9.2, 8.8],
            3.196171237968841,
            7.510223200616854,
            0.0068932756775046036,
        ),
        (
            vec![0.3, 0.3, 0.31, 0.29],
            vec![0.1, 0.5, 0.9, -0.3],
            0.0,
            3.0014999999062497,
            0.5,
        ),
        (vec![5.0, 7.0], vec![1.0, 2.0, 3.0, 2.5, 1.5], 3.771236166328254, 1.2607003891050583, 0.061794111138153654),
        (
            (1..=8).map(f64::from).collect(),
            (2..=9).map(f64::from).collect(),
            -0.8164965809277261,
            13.999999999999998,
            0.7860542432162176,
        ),
        (
            vec![0.12, -0.4, 0.9, 0.33, 0.05, -0.21, 0.47],
            vec![0.02, 0.01, -0.03, 0.04, 0.0],
            1.0441707819140047,
            6.059479464993263,
            0.16813077059169884,
        ),
    ]
}

fn random_mlp(rng: &mut Rng64, widths: &[usize]) -> MlpParams {
    let layers = widths
        .windows(2)
        .map(|w| Dense {
            w: Matrix::from_vec(w[1], w[0], (0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect())
                .expect("shape"),
            b: (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect(),
        })
        .collect::<Vec<_>>();
    let mut acts = vec![Activation::Tanh; layers.len()];
    *acts.last_mut().expect("non-empty") = Activation::Identity;
    MlpParams::new(layers, acts).expect("consistent widths")
}

fn random_batch(net: &PolicyNet, n: usize, rng: &mut Rng64) -> RolloutBatch {
    let d = net.input_dim();
    let obs = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape");
    let mut actions = Vec::new();
    let mut logp_old = Vec::new();
    for r in 0..n {
        let rec = net.forward(obs.row(r), rng).expect("forward");
        actions.push(rec.action);
        logp_old.push(rec.logp + rng.random_range(-0.5..0.5));
    }
    RolloutBatch {
        obs,
        actions,
        logp_old,
        rewards: vec![0.0; n],
        values: vec![0.0; n],
        dones: vec![false; n],
        bootstrap_value: 0.0,
        advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    }
}

fn criterion_1() -> Verdict {
    let mut rng = Rng64::seed_from_u64(1);
    let mut worst_mlp: f64 = 0.0;
    for _ in 0..100 {
        let depth = rng.random_range(1..4);
        let mut widths = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..7));
        }
        let p = random_mlp(&mut rng, &widths);
        let x: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..*widths.last().expect("non-empty")).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grads, _) = p.forward_backward(&x, &u).expect("forward_backward");
        let fd = finite_difference(&p, 1e-6, |q| {
            q.forward(&x).expect("forward").iter().zip(&u).map(|(o, w)| o * w).sum()
        });
        worst_mlp = worst_mlp.max(max_relative_error(&grads.segments().concat(), &fd, 1e-3));
    }

    let cfg = PpoConfig {
        entropy_coef: 0.05,
        ..PpoConfig::default()
    };
    let mut worst_ppo: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = Rng64::seed_from_u64(1000 + seed);
        let head = if seed % 2 == 0 {
            HeadKind::Categorical(rng.random_range(2..5))
        } else {
            HeadKind::Gaussian(rng.random_range(1..3))
        };
        let net = PolicyNet::new(&PolicySpec::new(rng.random_range(1..4), rng.random_range(2..6), head), &mut rng)
            .expect("net");
        let batch = random_batch(&net, 6, &mut rng);
        let (_, grads) = ppo_loss(&net, &batch, &cfg).expect("loss");
        let fd = finite_difference(&net, 1e-6, |q| ppo_loss(q, &batch, &cfg).expect("loss").0.total);
        worst_ppo = worst_ppo.max(max_relative_error(&grads.segments().concat(), &fd, 1e-3));
    }

    let mut worst_p: f64 = 0.0;
    for (a, b, _, _, p) in welch_oracle() {
        let w = welch_t_one_sided(&a, &b).expect("welch");
        worst_p = worst_p.max((w.p - p).abs());
    }
    verdict(
        worst_mlp <= 1e-4 && worst_ppo <= 1e-4 && worst_p <= 1e-6,
        format!("mlp grad rel err {worst_mlp:.2e}, ppo_loss grad rel err {worst_ppo:.2e} (100 nets each, tol 1e-4); welch |dp| {worst_p:.2e} over 10 oracle pairs (tol 1e-6)"),
    )
}

// ---------------------------------------------------------------------------
// 2. GAE against brute-force returns

fn criterion_2() -> Verdict {
    let mut rng = Rng64::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..12);
        let gamma = rng.random_range(0.5..1.0);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
        let boot = rng.random_range(-2.0..2.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, boot, gamma, 1.0);
        for t in 0..n {
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut k = t;
            loop {
                g += disc * rewards[k];
                disc *= gamma;
                if dones[k] {
                    break;
                }
                k += 1;
                if k == n {
                    g += disc * boot;
                    break;
                }
            }
            worst = worst.max((ret[t] - g).abs()).max((adv[t] - (g - values[t])).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |gae(λ=1) − brute force| {worst:.2e} over 1000 sequences (tol 1e-12)"))
}

// ---------------------------------------------------------------------------
// 3. environment invariants

fn criterion_3() -> Verdict {
    let mut rng = Rng64::seed_from_u64(3);
    let mut a_env = MiniSoccer::new(77);
    let mut b_env = MiniSoccer::new(77);
    let mut zero_sum = true;
    let mut deterministic = true;
    for _ in 0..10_000 {
        let ma = Move::ALL[rng.random_range(0..5)];
        let mb = Move::ALL[rng.random_range(0..5)];
        let x = a_env.step(ma, mb).expect("step");
        let y = b_env.step(ma, mb).expect("step");
        zero_sum &= x.reward(Side::A) + x.reward(Side::B) == 0.0;
        deterministic &= x == y && a_env.state() == b_env.state();
        if x.done {
            a_env.reset();
            b_env.reset();
        }
    }

    // Constant forward push: velocity is pointwise non-increasing in friction;
    // coasting never speeds up.
    let frictions = [0.6, 0.8, 1.0, 1.3, 1.6];
    let mut monotone = true;
    let mut steps = 0;
    while steps < 10_000 {
        let a = rng.random_range(0.05..1.0);
        let mass = rng.random_range(0.6..1.6);
        let mut envs: Vec<_> = frictions.iter().map(|&f| make_shifted_env(f, mass).expect("env")).collect();
        let coast_from = rng.random_range(0..200);
        for k in 0..200 {
            let act = if k < coast_from { a } else { 0.0 };
            let before: Vec<f64> = envs.iter().map(|e| e.velocity().abs()).collect();
            for e in envs.iter_mut() {
                e.step(act).expect("runner step");
            }
            let v: Vec<f64> = envs.iter().map(|e| e.velocity()).collect();
            monotone &= v.windows(2).all(|w| w[1] <= w[0]);
            if act == 0.0 {
                monotone &= envs.iter().zip(&before).all(|(e, b)| e.velocity().abs() <= *b);
            }
            steps += 1;
        }
    }

    let mut worst_shift: f64 = 0.0;
    let mut bounded = true;
    for _ in 0..10_000 {
        let t = rng.random_range(-3.0..3.0);
        let adv = rng.random_range(-1.0..=1.0);
        let delta = rng.random_range(0.0..1.5);
        let e = perturb_action(&[t], &[adv], delta)[0];
        let shift = (e - f64::clamp(t, -1.0, 1.0)).abs();
        bounded &= shift <= delta + 1e-15 && (-1.0..=1.0).contains(&e);
        worst_shift = worst_shift.max(shift - delta);
    }
    verdict(
        zero_sum && deterministic && monotone && bounded,
        format!(
            "soccer zero-sum {zero_sum}, deterministic {deterministic} (10k steps); runner friction monotone {monotone} ({steps} steps); δ bound {bounded} (10k draws, max excess {worst_shift:.1e})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. PPO on a two-armed bandit

/// Bernoulli bandit: arm 1 pays with probability 0.7, arm 0 with 0.3.
struct Bandit(Rng64);

impl RolloutSource for Bandit {
    fn observation(&mut self) -> advpol::Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    fn step(&mut self, record: &ForwardRecord) -> advpol::Result<Transition> {
        let p = if record.action.discrete() == 1 { 0.7 } else { 0.3 };
        Ok(Transition {
            reward: f64::from(u8::from(self.0.random_bool(p))),
            done: true,
        })
    }
}

fn criterion_4() -> Verdict {
    let mut hits = 0;
    let mut when = Vec::new();
    for seed in 0..10u64 {
        let mut rng = Rng64::seed_from_u64(seed);
        let net = PolicyNet::new(&PolicySpec::new(1, 16, HeadKind::Categorical(2)), &mut rng).expect("net");
        let cfg = PpoConfig {
            steps_per_iter: 64,
            minibatch_size: 32,
            lr: 1e-3,
            ..PpoConfig::default()
        };
        let mut trainer = PpoTrainer::new(net, cfg).expect("trainer");
        let mut env = Bandit(Rng64::seed_from_u64(100 + seed));
        let mut reached = None;
        for it in 1..=300 {
            trainer.train_iteration(&mut env, &mut rng).expect("iteration");
            if trainer.net.evaluate(&[1.0]).expect("eval").dist.summary()[1] >= 0.95 {
                reached = Some(it);
                break;
            }
        }
        if let Some(it) = reached {
            hits += 1;
            when.push(it.to_string());
        } else {
            when.push("-".into());
        }
    }
    verdict(hits >= 9, format!("{hits}/10 seeds reach P(better arm) ≥ 0.95 within 300 iterations (at {})", when.join(",")))
}

// ---------------------------------------------------------------------------
// 5. MiniSoccer: latent introspection vs black box

fn criterion_5() -> Verdict {
    let cfg = Attack2pConfig {
        modes: vec![IntrospectionMode::BlackBox, IntrospectionMode::Latent],
        ..Attack2pConfig::default()
    };
    let root = SeedTree::new(5).child("attack2p", 0);
    let pool = pretrain_pool(&cfg, root).expect("pretraining");
    let targets: Vec<PolicyNet> = pool.into_iter().filter(|t| !t.provenance.flagged).map(|t| t.net).collect();
    if targets.len() < 5 {
        return verdict(false, format!("only {} competent targets", targets.len()));
    }
    let cmp = compare_modes(&targets, &cfg, root).expect("comparison");
    let latent_final = cmp.values_at(IntrospectionMode::Latent, cfg.steps);
    let black_final = cmp.values_at(IntrospectionMode::BlackBox, cfg.steps);
    let p = welch_t_one_sided(&latent_final, &black_final).map_or(f64::NAN, |w| w.p);
    let latent_half = mean(&cmp.values_at(IntrospectionMode::Latent, cfg.steps / 2));
    let black_full = mean(&black_final);
    let auc_p = cmp
        .test(IntrospectionMode::Latent, "auc")
        .and_then(|t| t.welch)
        .map_or(f64::NAN, |w| w.p);
    let positive = latent_final.iter().all(|v| *v > 0.0);
    let bot = targets
        .iter()
        .map(|t| mean(&evaluate_match(t, None, Opponent::Bot, 50, SeedTree::new(55)).expect("eval")))
        .collect::<Vec<_>>();
    verdict(
        p < 0.05 && latent_half >= black_full,
        format!(
            "{} targets x {} seeds, 500k steps: final latent {:.2} vs blackbox {:.2}, p {p:.4} (need < 0.05); latent@50% {latent_half:.2} vs blackbox@100% {black_full:.2}; auc p {auc_p:.4}; latent > 0 on every target {positive}; targets vs bot {:?}",
            targets.len(),
            cfg.seeds,
            mean(&latent_final),
            black_full,
            bot.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. latent attack on TinyLM

fn criterion_6() -> Verdict {
    let cfg = LmAttackConfig::default();
    let st = study(&cfg, SeedTree::new(6).child("lmattack", 0)).expect("lm study");
    let bb = mean(&st.values_at(Arm::BlackBox, cfg.episodes));
    let wb = mean(&st.values_at(Arm::WhiteBox, cfg.episodes));
    let p60 = st
        .tests
        .iter()
        .find(|t| t.0 == "test_fraction")
        .and_then(|t| t.2)
        .map_or(f64::NAN, |w| w.p);
    let ratio = bb.min(wb) / st.base_rate;
    verdict(
        ratio >= 5.0 && p60 < 0.2,
        format!(
            "base rate {:.4}; final black_box {bb:.4} ({:.1}x), white_box {wb:.4} ({:.1}x), need ≥ 5x; white_box > black_box at 60% ({} episodes, {} seeds each): p {p60:.4} (expected < 0.2)",
            st.base_rate,
            bb / st.base_rate,
            wb / st.base_rate,
            cfg.test_step(),
            cfg.seeds
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. robust training under domain shift

fn criterion_7() -> Verdict {
    let cfg = RarlConfig::default();
    let st = rarl_study(&cfg, SeedTree::new(7).child("rarl", 0)).expect("rarl study");
    let cells = cfg.grid_n * cfg.grid_n;
    let grids_ok = RarlCondition::ALL
        .iter()
        .all(|&c| st.selected(c).count() == cfg.agents / 2 && st.selected(c).all(|a| a.grid.cells.len() == cells));
    let mut corners_ok = true;
    let mut detail = Vec::new();
    for cond in [RarlCondition::Rarl, RarlCondition::WbRarl] {
        let fr = st.corner_fractions(cond);
        corners_ok &= fr.iter().all(|(_, f)| *f > 0.5);
        detail.push(format!(
            "{} [{}]",
            cond.name(),
            fr.iter().map(|((f, m), x)| format!("({f:.1},{m:.1}):{x:.2}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let p = |name: &str| {
        st.tests
            .iter()
            .find(|t| t.0 == name)
            .and_then(|t| t.1)
            .map_or(f64::NAN, |w| w.p)
    };
    let gm = |c| mean(&st.grid_means(c));
    let tied = st.grid_means(RarlCondition::Rarl) == st.grid_means(RarlCondition::RlControl)
        && st.grid_means(RarlCondition::WbRarl) == st.grid_means(RarlCondition::RlControl);
    verdict(
        grids_ok && corners_ok,
        format!(
            "{} agents/condition, top half kept; 8x8 grids complete {grids_ok}; corner majority: {}; grid means rl {:.2} rarl {:.2} wb {:.2} (identical across conditions {tied}); p(wb>rarl) {:.4} (reported only), p(wb>rl) {:.4}",
            cfg.agents,
            detail.join("; "),
            gm(RarlCondition::RlControl),
            gm(RarlCondition::Rarl),
            gm(RarlCondition::WbRarl),
            p("wb_rarl>rarl"),
            p("wb_rarl>rl_control")
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. reproducibility from the saved manifest

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("run dir").flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).expect("inside").display().to_string();
                out.insert(rel, std::fs::read(&p).expect("csv"));
            }
        }
    }
    out
}

const SMALL_RUNS: [&str; 3] = [
    "experiment.kind = attack2p\nexperiment.seed = 81\nattack2p.targets = 2\nattack2p.seeds = 2\nattack2p.modes = blackbox,latent\nattack2p.pretrain_phase1_steps = 60000\nattack2p.pretrain_phase2_steps = 2000\nattack2p.steps = 4000\nattack2p.eval_interval = 2000\nattack2p.eval_episodes = 2\nattack2p.gate_episodes = 10\nppo.steps_per_iter = 1000\n",
    "experiment.kind = lmattack\nexperiment.seed = 82\nlmattack.seeds = 2\nlmattack.episodes = 400\nlmattack.eval_interval = 200\nlmattack.eval_prompts = 10\n",
    "experiment.kind = rarl\nexperiment.seed = 83\nrarl.agents = 4\nrarl.steps = 4000\nrarl.eval_interval = 2000\nrarl.eval_episodes = 2\nrarl.grid_n = 3\nppo.steps_per_iter = 1000\n",
];

fn criterion_8() -> Verdict {
    let root = tempfile::tempdir().expect("tempdir");
    let mut detail = Vec::new();
    let mut all_same = true;
    for (i, text) in SMALL_RUNS.iter().enumerate() {
        let mut c = Config::parse(text).expect("config");
        c.set(OUT_DIR_KEY, root.path().join(format!("{i}-first")).display());
        let first = run_experiment(c).expect("first run");
        let mut again = Config::load(&first.dir.join(MANIFEST_FILE)).expect("manifest");
        again.set(OUT_DIR_KEY, root.path().join(format!("{i}-again")).display());
        let second = run_experiment(again).expect("rerun");
        let (a, b) = (csvs(&first.dir), csvs(&second.dir));
        let same = !a.is_empty() && a == b;
        all_same &= same;
        let kind = text.lines().next().unwrap_or_default().trim_start_matches("experiment.kind = ");
        detail.push(format!("{kind}: {} csvs identical {same}", a.len()));
    }
    verdict(all_same, detail.join("; "))
}

type Criterion = (usize, &'static str, fn() -> Verdict);

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("ADVPOL_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 8] = [
        (1, "numerical core", criterion_1),
        (2, "gae oracle", criterion_2),
        (3, "environment invariants", criterion_3),
        (4, "ppo bandit", criterion_4),
        (5, "minisoccer latent vs blackbox", criterion_5),
        (6, "tinylm latent attack", criterion_6),
        (7, "rarl domain shift", criterion_7),
        (8, "manifest reproducibility", criterion_8),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&n)) {
            continue;
        }
        let clock = Instant::now();
        let v = f();
        println!(
            "criterion {n} ({name}): {} [{:.0}s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
