use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{serialize_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::rl::{IterationMetrics, PolicyModel, Trainer};
use crate::tensor::checkpoint;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Checkpoints are rewritten every this many iterations and at the end.
pub const CHECKPOINT_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutput {
    pub seed: u64,
    /// Paths relative to the run directory.
    pub metrics: String,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub code_version: String,
    pub config: String,
    pub status: RunStatus,
    pub seeds: Vec<SeedOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Contract(format!("{}: {}", path.display(), e)))
    }

    /// Replaces the manifest atomically through a temporary file.
    pub fn store(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let tmp = run_dir.join(format!(".{}.tmp", MANIFEST_FILE));
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Contract(e.to_string()))?;
        fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

pub fn metrics_file(seed: u64) -> String {
    format!("seed_{}.csv", seed)
}

pub fn checkpoint_file(seed: u64) -> String {
    format!("seed_{}.ckpt", seed)
}

/// Whether to keep training after an iteration.
pub type Observer<'a> = dyn FnMut(u64, &IterationMetrics) -> bool + 'a;

fn mix(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream
}

/// Builds a freshly initialized trainer for one seed.
pub fn build_trainer(config: &ExperimentConfig, seed: u64) -> Result<Trainer> {
    let spec = config.env_spec()?;
    let memory = config.build_memory()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let model = PolicyModel::new(memory, spec.num_actions(), &mut init_rng)?;
    Trainer::new(model, config.trainer.clone(), spec.build(mix(seed, 2))?, mix(seed, 3))
}

fn diverged(iteration: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { .. } | Error::Domain { .. } => Error::Divergence {
            iteration,
            detail: e.to_string(),
        },
        other => other,
    }
}

fn train_seed(config: &ExperimentConfig, seed: u64, run_dir: &Path, observer: &mut Observer) -> Result<bool> {
    let csv_path = run_dir.join(metrics_file(seed));
    let ckpt_path = run_dir.join(checkpoint_file(seed));
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| Error::Csv {
        path: csv_path.clone(),
        source: e,
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: csv_path.clone(),
        source: e,
    };
    let mut trainer = build_trainer(config, seed)?;
    while trainer.env_steps() < config.total_env_steps {
        let m = trainer
            .train_iteration()
            .map_err(|e| diverged(trainer.iteration() + 1, e))?;
        if !m.policy_loss.is_finite() || !m.value_loss.is_finite() {
            return Err(Error::Divergence {
                iteration: m.iteration,
                detail: "loss is not finite".into(),
            });
        }
        writer.serialize(&m).map_err(csv_err)?;
        writer.flush().map_err(|e| Error::io(&csv_path, e))?;
        if m.iteration % CHECKPOINT_EVERY == 0 {
            checkpoint::save(&trainer.model.params, &ckpt_path)?;
        }
        if !observer(seed, &m) {
            return Ok(false);
        }
    }
    checkpoint::save(&trainer.model.params, &ckpt_path)?;
    Ok(true)
}

/// Trains every seed in turn inside `run_dir`. The manifest is written
/// before training starts with status `incomplete` and finalized at the end.
/// An observer returning `false` stops the run, leaving it incomplete.
pub fn run_experiment(
    config: &ExperimentConfig,
    seeds: &[u64],
    run_dir: &Path,
    observer: &mut Observer,
) -> Result<RunManifest> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("no seeds to run".into()));
    }
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut manifest = RunManifest {
        name: config.name.clone(),
        code_version: format!("gcm {}", env!("CARGO_PKG_VERSION")),
        config: serialize_config(config)?,
        status: RunStatus::Incomplete,
        seeds: seeds
            .iter()
            .map(|&seed| SeedOutput {
                seed,
                metrics: metrics_file(seed),
                checkpoint: checkpoint_file(seed),
            })
            .collect(),
        error: None,
    };
    manifest.store(run_dir)?;
    for &seed in seeds {
        match train_seed(config, seed, run_dir, observer) {
            Ok(true) => {}
            Ok(false) => return Ok(manifest),
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.error = Some(format!("seed {}: {}", seed, e));
                manifest.store(run_dir)?;
                return Err(e);
            }
        }
    }
    manifest.status = RunStatus::Complete;
    manifest.store(run_dir)?;
    Ok(manifest)
}

/// Checks that a finished run directory holds exactly its manifest plus one
/// metrics file and one checkpoint per seed.
pub fn audit_run_dir(run_dir: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::load(run_dir)?;
    let mut expected: BTreeSet<String> = BTreeSet::new();
    expected.insert(MANIFEST_FILE.to_string());
    for s in &manifest.seeds {
        expected.insert(s.metrics.clone());
        expected.insert(s.checkpoint.clone());
    }
    let mut found = BTreeSet::new();
    for entry in fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))? {
        let entry = entry.map_err(|e| Error::io(run_dir, e))?;
        found.insert(entry.file_name().to_string_lossy().into_owned());
    }
    let missing: Vec<_> = expected.difference(&found).collect();
    let extra: Vec<_> = found.difference(&expected).collect();
    if manifest.status != RunStatus::Complete || !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Contract(format!(
            "run directory {} fails audit: status {:?}, missing {:?}, unexpected {:?}",
            run_dir.display(),
            manifest.status,
            missing,
            extra
        )));
    }
    Ok(manifest)
}

/// Resolves where a run writes: an explicit override wins over the
/// environment override, which wins over the configured directory.
pub fn resolve_run_dir(config: &ExperimentConfig, cli_out: Option<&Path>, env_root: Option<&Path>) -> PathBuf {
    let root = cli_out
        .map(Path::to_path_buf)
        .or_else(|| env_root.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    root.join(&config.name)
}
