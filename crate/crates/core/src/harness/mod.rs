//! Experiment plumbing: statistics, curve aggregation, flat configs, seed
//! derivation, CSV persistence and the top-level experiment runner.

mod config;
mod curves;
mod plot;
mod run;
mod seed;
mod stats;

pub use config::{Config, ExperimentKind, KIND_KEY, OUT_DIR_KEY, SEED_KEY};
pub use curves::{
    aggregate_curves, curve_csv, curve_points_csv, labelled_points_csv, read_curve, write_text, Curve, CurvePoint,
};
pub use plot::{gnuplot_blocks, plot_file};
pub use run::{
    binary_hash, git_blob_sha256, ppo_from_config, ppo_schema, run_experiment, schema_for, ExperimentOutput, RunOutcome,
    ERROR_MARKER, MANIFEST_FILE, OUT_ROOT_ENV,
};
pub use seed::SeedTree;
pub use stats::{mean, sem, welch_t_one_sided, SampleGroup, WelchResult};
