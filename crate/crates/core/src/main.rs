use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advpol::harness::{plot_file, run_experiment, Config, ExperimentOutput, KIND_KEY, OUT_DIR_KEY, SEED_KEY};

#[derive(Parser)]
#[command(name = "advpol", version, about = "Adversarial policy experiments at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config file describes.
    Run {
        #[arg(long)]
        config: PathBuf,
        overrides: Vec<String>,
    },
    /// Introspective adversaries against MiniSoccer targets.
    Attack2p {
        #[command(flatten)]
        common: Common,
        /// Introspection mode; repeat to compare several.
        #[arg(long = "mode")]
        modes: Vec<String>,
        #[arg(long)]
        target_pool: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        eval_interval: Option<u64>,
    },
    /// Latent-perturbation attacks on the frozen TinyLM.
    Lmattack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        white_box: bool,
        #[arg(long)]
        black_box: bool,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma-separated forbidden token ids.
        #[arg(long)]
        forbidden_set: Option<String>,
    },
    /// Robust training against action adversaries and shift-grid evaluation.
    Rarl {
        #[command(flatten)]
        common: Common,
        /// rl_control, rarl or wb_rarl; repeat for several.
        #[arg(long = "condition")]
        conditions: Vec<String>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        grid_lo: Option<f64>,
        #[arg(long)]
        grid_hi: Option<f64>,
    },
    /// Print gnuplot data blocks for a result CSV.
    Plot { csv: PathBuf },
}

fn base_config(kind: &str, common: &Common) -> advpol::Result<Config> {
    let mut c = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    match c.get(KIND_KEY) {
        Some(k) if k != kind => {
            return Err(advpol::Error::InvalidArgument(format!(
                "config describes a {k} experiment, not {kind}"
            )))
        }
        _ => c.set(KIND_KEY, kind),
    }
    for kv in &common.overrides {
        c.apply_override(kv)?;
    }
    if let Some(s) = common.seed {
        c.set(SEED_KEY, s);
    }
    if let Some(d) = &common.out_dir {
        c.set(OUT_DIR_KEY, d.display());
    }
    Ok(c)
}

fn set_opt<T: ToString>(c: &mut Config, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        c.set(key, v.to_string());
    }
}

fn build(command: &Command) -> advpol::Result<Option<Config>> {
    Ok(Some(match command {
        Command::Run { config, overrides } => {
            let mut c = Config::load(config)?;
            for kv in overrides {
                c.apply_override(kv)?;
            }
            c
        }
        Command::Attack2p {
            common,
            modes,
            target_pool,
            steps,
            eval_interval,
        } => {
            let mut c = base_config("attack2p", common)?;
            if !modes.is_empty() {
                c.set("attack2p.modes", modes.join(","));
            }
            set_opt(&mut c, "attack2p.target_pool", &target_pool.as_ref().map(|p| p.display()));
            set_opt(&mut c, "attack2p.steps", steps);
            set_opt(&mut c, "attack2p.eval_interval", eval_interval);
            c
        }
        Command::Lmattack {
            common,
            white_box,
            black_box,
            episodes,
            alpha,
            forbidden_set,
        } => {
            let mut c = base_config("lmattack", common)?;
            let arms = match (white_box, black_box) {
                (true, false) => Some("white_box"),
                (false, true) => Some("black_box"),
                (true, true) => Some("black_box,white_box"),
                (false, false) => None,
            };
            set_opt(&mut c, "lmattack.arms", &arms);
            set_opt(&mut c, "lmattack.episodes", episodes);
            set_opt(&mut c, "lmattack.alpha", alpha);
            set_opt(&mut c, "lmattack.forbidden", forbidden_set);
            c
        }
        Command::Rarl {
            common,
            conditions,
            agents,
            steps,
            delta,
            grid_lo,
            grid_hi,
        } => {
            let mut c = base_config("rarl", common)?;
            if !conditions.is_empty() {
                c.set("rarl.conditions", conditions.join(","));
            }
            set_opt(&mut c, "rarl.agents", agents);
            set_opt(&mut c, "rarl.steps", steps);
            set_opt(&mut c, "rarl.delta", delta);
            set_opt(&mut c, "rarl.grid_lo", grid_lo);
            set_opt(&mut c, "rarl.grid_hi", grid_hi);
            c
        }
        Command::Plot { csv } => {
            print!("{}", plot_file(csv)?);
            return Ok(None);
        }
    }))
}

fn summarize(out: &ExperimentOutput) {
    match out {
        ExperimentOutput::Attack2p(cmp) => {
            for t in &cmp.tests {
                let p = t.welch.map_or(f64::NAN, |w| w.p);
                println!("{} vs blackbox [{}]: {:.3} vs {:.3}, p = {p:.4}", t.mode, t.checkpoint, t.mean_mode, t.mean_baseline);
            }
        }
        ExperimentOutput::Lmattack(st) => {
            println!("base rate {:.4}", st.base_rate);
            for (label, step, w) in &st.tests {
                let p = w.map_or(f64::NAN, |w| w.p);
                println!("white_box > black_box at {label} ({step} episodes): p = {p:.4}");
            }
        }
        ExperimentOutput::Rarl(st) => {
            for (name, w) in &st.tests {
                let p = w.map_or(f64::NAN, |w| w.p);
                println!("{name}: p = {p:.4}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(&cli.command).and_then(|c| match c {
        Some(c) => run_experiment(c).map(Some),
        None => Ok(None),
    });
    match result {
        Ok(Some(outcome)) => {
            summarize(&outcome.output);
            println!("artifacts in {}", outcome.dir.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
