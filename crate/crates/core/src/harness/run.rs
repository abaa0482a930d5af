use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use super::config::{Config, ExperimentKind, OUT_DIR_KEY};
use super::curves::write_text;
use crate::attack2p::{self, Attack2pConfig, Comparison};
use crate::lmattack::{self, LmAttackConfig, LmStudy};
use crate::policy::hex;
use crate::ppo::PpoConfig;
use crate::rarl::{self, RarlConfig, RarlStudy};
use crate::{Error, Result};

/// Environment variable naming the artifact root (default `runs`).
pub const OUT_ROOT_ENV: &str = "ADVPOL_OUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.cfg";
/// Written into the artifact directory when a run fails part-way.
pub const ERROR_MARKER: &str = "ERROR";

pub fn ppo_schema(d: &PpoConfig) -> Vec<(&'static str, String)> {
    vec![
        ("ppo.clip_eps", d.clip_eps.to_string()),
        ("ppo.value_coef", d.value_coef.to_string()),
        ("ppo.entropy_coef", d.entropy_coef.to_string()),
        ("ppo.epochs", d.epochs.to_string()),
        ("ppo.minibatch_size", d.minibatch_size.to_string()),
        ("ppo.lr", d.lr.to_string()),
        ("ppo.gamma", d.gamma.to_string()),
        ("ppo.lambda", d.lambda.to_string()),
        ("ppo.steps_per_iter", d.steps_per_iter.to_string()),
        ("ppo.max_grad_norm", d.max_grad_norm.to_string()),
    ]
}

pub fn ppo_from_config(c: &Config) -> Result<PpoConfig> {
    let cfg = PpoConfig {
        clip_eps: c.parse_key("ppo.clip_eps")?,
        value_coef: c.parse_key("ppo.value_coef")?,
        entropy_coef: c.parse_key("ppo.entropy_coef")?,
        epochs: c.parse_key("ppo.epochs")?,
        minibatch_size: c.parse_key("ppo.minibatch_size")?,
        lr: c.parse_key("ppo.lr")?,
        gamma: c.parse_key("ppo.gamma")?,
        lambda: c.parse_key("ppo.lambda")?,
        steps_per_iter: c.parse_key("ppo.steps_per_iter")?,
        max_grad_norm: c.parse_key("ppo.max_grad_norm")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Keys and defaults accepted by an experiment kind.
pub fn schema_for(kind: ExperimentKind) -> Vec<(&'static str, String)> {
    match kind {
        ExperimentKind::Attack2p => Attack2pConfig::schema(),
        ExperimentKind::Lmattack => LmAttackConfig::schema(),
        ExperimentKind::Rarl => RarlConfig::schema(),
    }
}

/// SHA-256 of `blob <len>\0<bytes>`, the object id git assigns a file in a
/// SHA-256 repository.
pub fn git_blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

/// Content hash of the running executable, or `unknown`.
pub fn binary_hash() -> String {
    std::env::current_exe()
        .and_then(std::fs::read)
        .map_or_else(|_| "unknown".to_string(), |b| git_blob_sha256(&b))
}

#[derive(Clone, Debug)]
pub enum ExperimentOutput {
    Attack2p(Box<Comparison>),
    Lmattack(Box<LmStudy>),
    Rarl(Box<RarlStudy>),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub output: ExperimentOutput,
}

fn default_out_dir(kind: ExperimentKind, seed: u64) -> PathBuf {
    let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S%.3f");
    root.join(format!("{kind}-{stamp}-s{seed}"))
}

fn manifest_header(started: &str) -> String {
    format!("# binary_sha256 = {}\n# started = {started}\n", binary_hash())
}

/// Materializes `config`, creates the artifact directory, writes the
/// manifest and dispatches to the experiment driver.
///
/// The manifest omits `experiment.out_dir`, so rerunning from it writes a
/// fresh directory with identical CSVs. A failing driver leaves an
/// [`ERROR_MARKER`] file next to whatever it already wrote.
pub fn run_experiment(mut config: Config) -> Result<RunOutcome> {
    let kind = config.kind()?;
    config.materialize(&schema_for(kind))?;
    let seed = config.seed()?;
    let dir = config
        .get(OUT_DIR_KEY)
        .map_or_else(|| default_out_dir(kind, seed), PathBuf::from);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let started = chrono::Local::now().to_rfc3339();
    let header = manifest_header(&started);
    let body = config.to_text(&[OUT_DIR_KEY]);
    let manifest = dir.join(MANIFEST_FILE);
    write_text(&manifest, &format!("{header}{body}"))?;
    let clock = Instant::now();
    let result = dispatch(kind, &config, &dir);
    let wall = clock.elapsed().as_secs_f64();
    match result {
        Ok(output) => {
            write_text(&manifest, &format!("{header}# wall_clock_secs = {wall:.3}\n{body}"))?;
            Ok(RunOutcome { dir, output })
        }
        Err(e) => {
            let _ = write_text(&dir.join(ERROR_MARKER), &format!("{e}\nafter {wall:.3} s\n"));
            Err(e)
        }
    }
}

fn dispatch(kind: ExperimentKind, c: &Config, dir: &Path) -> Result<ExperimentOutput> {
    Ok(match kind {
        ExperimentKind::Attack2p => ExperimentOutput::Attack2p(Box::new(attack2p::run(c, dir)?)),
        ExperimentKind::Lmattack => ExperimentOutput::Lmattack(Box::new(lmattack::run(c, dir)?)),
        ExperimentKind::Rarl => ExperimentOutput::Rarl(Box::new(rarl::run(c, dir)?)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // sha256("blob 6\0hello\n")
        assert_eq!(
            git_blob_sha256(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn ppo_keys_round_trip() {
        let d = PpoConfig {
            lr: 1e-3,
            epochs: 7,
            ..PpoConfig::default()
        };
        let mut c = Config::new();
        for (k, v) in ppo_schema(&d) {
            c.set(k, v);
        }
        assert_eq!(ppo_from_config(&c).unwrap(), d);
    }

    #[test]
    fn missing_kind_is_named() {
        let err = run_experiment(Config::parse("experiment.seed = 1\n").unwrap()).unwrap_err();
        assert!(err.to_string().contains("experiment.kind"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "experiment.kind = rarl\nexperiment.seed = 1\nrarl.deltaa = 0.3\n";
        let err = run_experiment(Config::parse(text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 3, .. }), "{err}");
    }

    #[test]
    fn failure_leaves_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Config::new();
        c.set("experiment.kind", "rarl");
        c.set("experiment.seed", 1);
        c.set(OUT_DIR_KEY, dir.path().display());
        // eval_interval that does not divide the budget fails inside the driver
        c.set("rarl.steps", 3000);
        assert!(run_experiment(c).is_err());
        assert!(dir.path().join(ERROR_MARKER).exists());
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("rarl.delta = 0.5"));
        assert!(!manifest.contains(OUT_DIR_KEY));
    }
}
