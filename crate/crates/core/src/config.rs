//! Plain-text `key = value` configuration shared by config files, the CLI
//! flags and the per-run config echo.
//!
//! Keys are kebab-case and identical to the long CLI flags. `#` starts a
//! comment. Floats are written in shortest round-trip form so an echoed
//! file reproduces a run exactly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::harness::ExperimentConfig;
use crate::replay::MixMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
}

/// One tunable field: its key, unit, default description and accessors.
pub struct ConfigKey {
    pub name: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
    get: fn(&ExperimentConfig) -> String,
    set: fn(&mut ExperimentConfig, &str) -> Result<(), String>,
}

impl ConfigKey {
    pub fn get(&self, cfg: &ExperimentConfig) -> String {
        (self.get)(cfg)
    }

    pub fn set(&self, cfg: &mut ExperimentConfig, value: &str) -> Result<(), ConfigError> {
        (self.set)(cfg, value.trim()).map_err(|reason| ConfigError::InvalidValue {
            key: self.name.to_string(),
            value: value.to_string(),
            reason,
        })
    }

    pub fn default_value(&self) -> String {
        self.get(&ExperimentConfig::default())
    }
}

fn parse<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

macro_rules! key {
    ($name:literal, $unit:literal, $help:literal, |$c:ident| $($field:tt)+) => {
        ConfigKey {
            name: $name,
            unit: $unit,
            help: $help,
            get: |$c| $($field)+.to_string(),
            set: |$c, v| {
                $($field)+ = parse(v)?;
                Ok(())
            },
        }
    };
}

pub static KEYS: &[ConfigKey] = &[
    key!("p", "probability", "chance that a replayed experience comes from the demonstration buffer", |c| c.p),
    key!("episodes", "episodes", "training episodes", |c| c.episodes),
    key!("checkpoint-every", "episodes", "checkpoint interval; must divide episodes", |c| c.checkpoint_every),
    key!("eval-episodes", "episodes", "evaluation episodes per checkpoint", |c| c.eval_episodes),
    ConfigKey {
        name: "mix-mode",
        unit: "prebuilt|online",
        help: "mix once into a combined buffer, or route every minibatch slot",
        get: |c| c.mix_mode.as_str().to_string(),
        set: |c, v| {
            c.mix_mode = v.parse::<MixMode>()?;
            Ok(())
        },
    },
    key!("seed", "integer", "experiment seed; every random stream derives from it", |c| c.seed),
    key!("gradient-steps-per-episode", "updates", "training steps per episode", |c| c.gradient_steps_per_episode),
    key!("explore-size", "experiences", "self-exploration transitions to collect", |c| c.explore_size),
    key!("demo-size", "experiences", "demonstration transitions to collect", |c| c.demo_size),
    key!("mixed-size", "experiences", "entries in the prebuilt mixed buffer", |c| c.mixed_size),
    key!("half-extent", "world units", "world is [-h, h]^2", |c| c.env.half_extent),
    key!("n-obstacles", "count", "obstacles per layout (observation layout fixes this at 9)", |c| c.env.n_obstacles),
    key!("obstacle-radius", "world units", "obstacle radius", |c| c.env.obstacle_radius),
    key!("agent-radius", "world units", "agent radius", |c| c.env.agent_radius),
    key!("success-radius", "world units", "goal distance counted as success", |c| c.env.success_radius),
    key!("dt", "time units", "integration step", |c| c.env.dt),
    key!("damping", "fraction per step", "velocity fraction removed each step", |c| c.env.damping),
    key!("accel-gain", "force per action unit", "action-to-force gain", |c| c.env.accel_gain),
    key!("max-steps", "steps", "episode step cap", |c| c.env.max_steps),
    key!("min-start-goal-dist", "world units", "minimum start-to-goal distance at reset", |c| c.env.min_start_goal_dist),
    key!("spawn-clearance", "world units", "obstacle keep-out around start and goal", |c| c.env.spawn_clearance),
    key!("gamma", "discount", "reward discount", |c| c.agent.gamma),
    key!("tau", "fraction", "target-network soft-update rate", |c| c.agent.tau),
    key!("actor-lr", "learning rate", "actor Adam step size", |c| c.agent.actor_lr),
    key!("critic-lr", "learning rate", "critic Adam step size", |c| c.agent.critic_lr),
    key!("batch-size", "experiences", "minibatch size", |c| c.agent.batch_size),
    key!("noise-sigma", "action units", "std-dev of Gaussian exploration noise", |c| c.agent.noise_sigma),
    key!("warmup", "experiences", "transitions collected before online training starts", |c| c.agent.warmup),
];

pub fn lookup(name: &str) -> Result<&'static ConfigKey, ConfigError> {
    KEYS.iter().find(|k| k.name == name).ok_or_else(|| ConfigError::UnknownKey(name.to_string()))
}

pub fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    lookup(key)?.set(cfg, value)
}

/// Splits `text` into `(key, value)` pairs, skipping comments and blank lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Applies every `key = value` line of `text` on top of `cfg`.
pub fn apply_kv(cfg: &mut ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    for (key, value) in parse_pairs(text)? {
        apply(cfg, &key, &value)?;
    }
    Ok(())
}

pub fn parse_kv(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    apply_kv(&mut cfg, text)?;
    Ok(cfg)
}

pub fn load_kv_file(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_kv(&text)
}

/// Every key, one per line, in table order.
pub fn to_kv(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    for k in KEYS {
        let _ = writeln!(out, "{} = {}", k.name, k.get(cfg));
    }
    out
}
