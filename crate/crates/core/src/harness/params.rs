use serde::Serialize;

use super::config::{ExperimentConfig, MemoryConfig, MemoryKind};
use crate::error::Result;
use crate::memory::MemoryModule;
use crate::rl::head_param_count;

pub const DEFAULT_HIDDEN_SIZES: [usize; 3] = [8, 16, 32];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamCountRow {
    pub module: &'static str,
    pub hidden: usize,
    pub memory: usize,
    pub heads: usize,
    pub total: usize,
}

/// Trainable parameters of every module kind at each hidden size, for the
/// configured environment and with the configured graph settings.
pub fn count_params(config: &ExperimentConfig, hidden_sizes: &[usize]) -> Result<Vec<ParamCountRow>> {
    let spec = config.env_spec()?;
    let mut rows = Vec::new();
    for kind in [MemoryKind::Gcm, MemoryKind::Lstm, MemoryKind::Mlp] {
        for &hidden in hidden_sizes {
            let mut m: MemoryConfig = config.memory.clone();
            m.kind = kind;
            m.hidden = hidden;
            if kind == MemoryKind::Gcm && m.layers.is_none() {
                m.layers = Some(2);
            }
            let memory = m.build(spec.obs_dim())?.param_count();
            let heads = head_param_count(hidden, spec.num_actions());
            rows.push(ParamCountRow {
                module: kind.name(),
                hidden,
                memory,
                heads,
                total: memory + heads,
            });
        }
    }
    Ok(rows)
}
