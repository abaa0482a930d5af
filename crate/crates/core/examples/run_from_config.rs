//! Runs a small experiment from a config file, then reruns it from the saved
//! manifest and checks that every CSV came out byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use advpol::harness::{run_experiment, Config, MANIFEST_FILE};

const CONFIG: &str = "\
# a quick robustness study
experiment.kind = rarl
experiment.seed = 17
rarl.agents = 4
rarl.steps = 4000
rarl.eval_interval = 2000
rarl.eval_episodes = 2
rarl.grid_n = 3
ppo.steps_per_iter = 1000
ppo.minibatch_size = 250
";

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable run dir").flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).expect("inside dir").display().to_string();
                out.insert(rel, std::fs::read(&p).expect("readable csv"));
            }
        }
    }
    out
}

fn main() -> advpol::Result<()> {
    let root = std::env::temp_dir().join(format!("advpol-example-{}", std::process::id()));
    let mut first = Config::parse(CONFIG)?;
    first.set("experiment.out_dir", root.join("first").display());
    let a = run_experiment(first)?;
    println!("first run in {}", a.dir.display());
    print!("{}", std::fs::read_to_string(a.dir.join(MANIFEST_FILE)).map_err(advpol::Error::RawIo)?.lines().take(6).map(|l| format!("  {l}\n")).collect::<String>());

    let mut again = Config::load(&a.dir.join(MANIFEST_FILE))?;
    again.set("experiment.out_dir", root.join("second").display());
    let b = run_experiment(again)?;
    let (x, y) = (csvs(&a.dir), csvs(&b.dir));
    let same = x == y;
    println!("{} CSV files, identical after rerun: {same}", x.len());
    std::fs::remove_dir_all(&root).ok();
    Ok(())
}
