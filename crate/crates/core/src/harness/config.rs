//! Declarative experiment configuration in TOML.
//!
//! ```toml
//! name = "cartpole-gcm"
//! preset = "cartpole-ppo-gcm32"
//! seeds = [0, 1, 2]
//!
//! [memory]
//! prior = "or(temporal(1), temporal(2))"
//!
//! [trainer]
//! lr = 1e-4
//! ```
//!
//! A preset named `<env>-<algo>-<module><hidden>` supplies every field;
//! anything written explicitly overrides it. Environments are `cartpole` or
//! `cardgame<n>`, algorithms `ppo` or `a2c`, modules `gcm`, `mlp` or `lstm`.
//! Unknown keys are rejected.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::baselines::{Lstm, Mlp};
use crate::env::{default_card_episode_limit, EnvSpec};
use crate::error::{Error, Result};
use crate::gcm::{parse_prior, Activation, Gcm, GcmConfig, PriorSpec};
use crate::memory::AnyMemory;
use crate::rl::{Algorithm, TrainConfig};
use crate::tensor::Reduction;

pub const CARTPOLE_PRIOR: &str = "or(temporal(1), temporal(2))";
pub const CARDGAME_PRIOR: &str = "or(temporal(1), temporal(2), identity(pointer_value, faceup_value))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Cartpole,
    Cardgame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Gcm,
    Mlp,
    Lstm,
}

impl MemoryKind {
    pub fn name(self) -> &'static str {
        match self {
            MemoryKind::Gcm => "gcm",
            MemoryKind::Mlp => "mlp",
            MemoryKind::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cards: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_limit: Option<usize>,
}

impl EnvConfig {
    pub fn spec(&self) -> Result<EnvSpec> {
        let spec = match self.kind {
            EnvKind::Cartpole => EnvSpec::Cartpole,
            EnvKind::Cardgame => {
                let cards = self
                    .cards
                    .ok_or_else(|| Error::Config("card game needs `cards`".into()))?;
                let episode_limit = self
                    .episode_limit
                    .or_else(|| default_card_episode_limit(cards))
                    .ok_or_else(|| Error::Config(format!("no default episode limit for {} cards", cards)))?;
                EnvSpec::CardGame { cards, episode_limit }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    pub kind: MemoryKind,
    pub hidden: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<String>,
}

impl MemoryConfig {
    pub fn prior_spec(&self) -> Result<PriorSpec> {
        parse_prior(self.prior.as_deref().unwrap_or("empty"))
    }

    /// Instantiates the module for observations of width `input_dim`.
    pub fn build(&self, input_dim: usize) -> Result<AnyMemory> {
        if self.hidden == 0 {
            return Err(Error::Config("memory hidden size must be positive".into()));
        }
        Ok(match self.kind {
            MemoryKind::Gcm => {
                let mut cfg = GcmConfig::new(input_dim, self.hidden, self.prior_spec()?);
                cfg.layers = self.layers.unwrap_or(2);
                cfg.aggregation = match self.aggregation.unwrap_or(Aggregation::Sum) {
                    Aggregation::Sum => Reduction::Sum,
                    Aggregation::Mean => Reduction::Mean,
                };
                cfg.activation = match self.activation.unwrap_or(ActivationName::Tanh) {
                    ActivationName::Tanh => Activation::Tanh,
                    ActivationName::Relu => Activation::Relu,
                };
                AnyMemory::Gcm(Gcm::new(cfg)?)
            }
            MemoryKind::Mlp => AnyMemory::Mlp(Mlp::new(input_dim, self.hidden)),
            MemoryKind::Lstm => AnyMemory::Lstm(Lstm::new(input_dim, self.hidden)),
        })
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub seeds: Vec<u64>,
    pub total_env_steps: usize,
    pub output_dir: String,
    pub env: EnvConfig,
    pub memory: MemoryConfig,
    pub trainer: TrainConfig,
}

impl ExperimentConfig {
    /// Expands a preset name into a complete configuration.
    pub fn from_preset(preset: &str) -> Result<Self> {
        let parts: Vec<&str> = preset.split('-').collect();
        let bad = || Error::Config(format!("unknown preset `{}`", preset));
        if parts.len() != 3 {
            return Err(bad());
        }
        let env = if parts[0] == "cartpole" {
            EnvConfig {
                kind: EnvKind::Cartpole,
                cards: None,
                episode_limit: None,
            }
        } else if let Some(n) = parts[0].strip_prefix("cardgame") {
            let cards: usize = n.parse().map_err(|_| bad())?;
            EnvConfig {
                kind: EnvKind::Cardgame,
                cards: Some(cards),
                episode_limit: Some(default_card_episode_limit(cards).unwrap_or(30)),
            }
        } else {
            return Err(bad());
        };
        let trainer = match parts[1] {
            "ppo" => TrainConfig::ppo_cartpole(),
            "a2c" => TrainConfig::a2c_cardgame(),
            _ => return Err(bad()),
        };
        let module = parts[2];
        let split = module.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let kind = match &module[..split] {
            "gcm" => MemoryKind::Gcm,
            "mlp" => MemoryKind::Mlp,
            "lstm" => MemoryKind::Lstm,
            _ => return Err(bad()),
        };
        let hidden: usize = module[split..].parse().map_err(|_| bad())?;
        let memory = if kind == MemoryKind::Gcm {
            let prior = match env.kind {
                EnvKind::Cartpole => CARTPOLE_PRIOR,
                EnvKind::Cardgame => CARDGAME_PRIOR,
            };
            MemoryConfig {
                kind,
                hidden,
                layers: Some(2),
                aggregation: Some(Aggregation::Sum),
                activation: Some(ActivationName::Tanh),
                prior: Some(prior.to_string()),
            }
        } else {
            MemoryConfig {
                kind,
                hidden,
                layers: None,
                aggregation: None,
                activation: None,
                prior: None,
            }
        };
        let total_env_steps = match env.kind {
            EnvKind::Cartpole => 1_500_000,
            EnvKind::Cardgame => 2_000_000,
        };
        Ok(Self {
            name: preset.to_string(),
            preset: Some(preset.to_string()),
            seeds: vec![0, 1, 2],
            total_env_steps,
            output_dir: "runs".to_string(),
            env,
            memory,
            trainer,
        })
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        self.env.spec()
    }

    pub fn build_memory(&self) -> Result<AnyMemory> {
        self.memory.build(self.env_spec()?.obs_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid experiment name `{}`", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.total_env_steps == 0 {
            return Err(Error::Config("total_env_steps must be positive".into()));
        }
        self.trainer.validate()?;
        self.build_memory()?;
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    kind: Option<EnvKind>,
    cards: Option<Spanned<usize>>,
    episode_limit: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMemory {
    kind: Option<MemoryKind>,
    hidden: Option<usize>,
    layers: Option<usize>,
    aggregation: Option<Aggregation>,
    activation: Option<ActivationName>,
    prior: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrainer {
    algorithm: Option<Algorithm>,
    gamma: Option<f64>,
    lambda: Option<f64>,
    vf_coeff: Option<f32>,
    entropy_coeff: Option<f32>,
    grad_clip: Option<f32>,
    lr: Option<f32>,
    batch_size: Option<usize>,
    minibatch_size: Option<usize>,
    sgd_iters: Option<usize>,
    clip_param: Option<f32>,
    vf_clip: Option<f32>,
    kl_target: Option<f32>,
    kl_coeff: Option<f32>,
    normalize_advantages: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    preset: Option<Spanned<String>>,
    seeds: Option<Vec<u64>>,
    total_env_steps: Option<usize>,
    output_dir: Option<String>,
    env: Option<RawEnv>,
    memory: Option<RawMemory>,
    trainer: Option<RawTrainer>,
}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn parse_error(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
    let (line, column) = span.map_or((1, 1), |s| line_col(text, s.start));
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn missing(field: &str) -> Error {
    Error::Config(format!("missing field `{}` (set it or pick a preset)", field))
}

macro_rules! overlay {
    ($base:expr, $raw:expr, $($field:ident),+) => {
        $( if let Some(v) = $raw.$field { $base.$field = v; } )+
    };
}

/// Parses and validates a configuration, filling defaults from its preset.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, e.span(), e.message().trim()))?;
    let mut cfg = match &raw.preset {
        Some(p) => ExperimentConfig::from_preset(p.get_ref())
            .map_err(|e| parse_error(text, Some(p.span()), e.to_string()))?,
        None => {
            let env = raw.env.as_ref().ok_or_else(|| missing("env"))?;
            let memory = raw.memory.as_ref().ok_or_else(|| missing("memory"))?;
            let algorithm = raw
                .trainer
                .as_ref()
                .and_then(|t| t.algorithm)
                .ok_or_else(|| missing("trainer.algorithm"))?;
            ExperimentConfig {
                name: String::new(),
                preset: None,
                seeds: raw.seeds.clone().ok_or_else(|| missing("seeds"))?,
                total_env_steps: raw.total_env_steps.ok_or_else(|| missing("total_env_steps"))?,
                output_dir: "runs".to_string(),
                env: EnvConfig {
                    kind: env.kind.ok_or_else(|| missing("env.kind"))?,
                    cards: None,
                    episode_limit: None,
                },
                memory: MemoryConfig {
                    kind: memory.kind.ok_or_else(|| missing("memory.kind"))?,
                    hidden: memory.hidden.ok_or_else(|| missing("memory.hidden"))?,
                    layers: None,
                    aggregation: None,
                    activation: None,
                    prior: None,
                },
                trainer: match algorithm {
                    Algorithm::Ppo => TrainConfig::ppo_cartpole(),
                    Algorithm::A2c => TrainConfig::a2c_cardgame(),
                },
            }
        }
    };
    cfg.preset = raw.preset.as_ref().map(|p| p.get_ref().clone());
    if let Some(name) = raw.name {
        cfg.name = name;
    }
    if cfg.name.is_empty() {
        return Err(missing("name"));
    }
    overlay!(cfg, raw, seeds, total_env_steps, output_dir);
    if let Some(env) = raw.env {
        if let Some(kind) = env.kind {
            if kind != cfg.env.kind {
                cfg.env.cards = None;
                cfg.env.episode_limit = None;
            }
            cfg.env.kind = kind;
        }
        if let Some(cards) = env.cards {
            let n = *cards.get_ref();
            if n < 2 || n % 2 != 0 {
                return Err(parse_error(
                    text,
                    Some(cards.span()),
                    format!("card count must be even and at least 2, got {}", n),
                ));
            }
            cfg.env.cards = Some(n);
            if env.episode_limit.is_none() {
                cfg.env.episode_limit = default_card_episode_limit(n).or(cfg.env.episode_limit);
            }
        }
        if env.episode_limit.is_some() {
            cfg.env.episode_limit = env.episode_limit;
        }
    }
    if cfg.env.kind == EnvKind::Cartpole {
        cfg.env.cards = None;
        cfg.env.episode_limit = None;
    }
    if let Some(m) = raw.memory {
        if let Some(kind) = m.kind {
            cfg.memory.kind = kind;
        }
        overlay!(cfg.memory, m, hidden);
        if m.layers.is_some() {
            cfg.memory.layers = m.layers;
        }
        if m.aggregation.is_some() {
            cfg.memory.aggregation = m.aggregation;
        }
        if m.activation.is_some() {
            cfg.memory.activation = m.activation;
        }
        if let Some(prior) = m.prior {
            let spec = parse_prior(prior.get_ref()).map_err(|e| match e {
                Error::Parse { line, column, message } => {
                    // the prior sits inside a quoted string; shift into file coordinates
                    let (l0, c0) = line_col(text, prior.span().start + 1);
                    let column = if line == 1 { c0 + column - 1 } else { column };
                    Error::Parse {
                        line: l0 + line - 1,
                        column,
                        message: format!("in prior: {}", message),
                    }
                }
                other => parse_error(text, Some(prior.span()), other.to_string()),
            })?;
            cfg.memory.prior = Some(spec.to_string());
        }
    }
    if cfg.memory.kind == MemoryKind::Gcm {
        cfg.memory.layers.get_or_insert(2);
        cfg.memory.aggregation.get_or_insert(Aggregation::Sum);
        cfg.memory.activation.get_or_insert(ActivationName::Tanh);
        if cfg.memory.prior.is_none() {
            let default = match cfg.env.kind {
                EnvKind::Cartpole => CARTPOLE_PRIOR,
                EnvKind::Cardgame => CARDGAME_PRIOR,
            };
            cfg.memory.prior = Some(default.to_string());
        }
        if let Some(p) = &cfg.memory.prior {
            cfg.memory.prior = Some(parse_prior(p)?.to_string());
        }
    } else {
        cfg.memory.layers = None;
        cfg.memory.aggregation = None;
        cfg.memory.activation = None;
        cfg.memory.prior = None;
    }
    if let Some(t) = raw.trainer {
        overlay!(
            cfg.trainer,
            t,
            algorithm,
            gamma,
            lambda,
            vf_coeff,
            entropy_coeff,
            grad_clip,
            lr,
            batch_size,
            minibatch_size,
            sgd_iters,
            clip_param,
            vf_clip,
            kl_target,
            kl_coeff,
            normalize_advantages
        );
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every field explicitly, so parsing the output reproduces `cfg`.
pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize config: {}", e)))
}
