//! Config-driven experiment runner: seeded training runs that write one
//! metrics CSV and one checkpoint per seed next to a run manifest.

mod config;
mod params;
mod run;
mod summary;

pub use config::{
    parse_config, serialize_config, ActivationName, Aggregation, EnvConfig, EnvKind, ExperimentConfig, MemoryConfig,
    MemoryKind, CARDGAME_PRIOR, CARTPOLE_PRIOR,
};
pub use params::{count_params, ParamCountRow, DEFAULT_HIDDEN_SIZES};
pub use run::{
    audit_run_dir, build_trainer, checkpoint_file, metrics_file, resolve_run_dir, run_experiment, Observer,
    RunManifest, RunStatus, SeedOutput, CHECKPOINT_EVERY, MANIFEST_FILE,
};
pub use summary::{read_metrics, summarize, summarize_runs, t_half_width, write_summary, SummaryRow, CONFIDENCE};

/// Environment variable that overrides the configured output root.
pub const OUTPUT_ROOT_ENV: &str = "GCM_OUTPUT_ROOT";
