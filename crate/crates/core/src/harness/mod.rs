//! Experiment orchestration: buffer collection, offline training from a
//! mixed source, checkpoint evaluation and metrics output.

mod collect;
mod eval;
mod experiment;
mod pilot;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::agent::{AgentError, DdpgConfig};
use crate::env2d::{EnvError, WorldConfig};
use crate::replay::{FormatError, MixMode, ReplayError, DEFAULT_CAPACITY};

pub use collect::collect_exploration;
pub use eval::{
    evaluate, evaluate_checkpoint, evaluate_layouts, evaluation_layouts, run_episode, EpisodeLog, EvalReport, MetricsRow,
    CSV_HEADER,
};
pub use experiment::{
    buffer_path, load_sources, read_checkpoint_meta, run_dir, run_experiment, write_metrics_csv, BufferKind,
    ExperimentReport,
};
pub use pilot::{collect_demonstrations, scripted_demonstrator, Pilot, ScriptedPilot, REPULSION_GAIN, REPULSION_RANGE};
pub use train::{checkpoint_file_name, train_offline, Checkpoint, SourceTally, TrainOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("{kind} buffer not found at {path}; create it with `demomix {command} --seed {seed} --out {path}`", path = path.display())]
    MissingBuffer { kind: &'static str, command: &'static str, path: PathBuf, seed: u64 },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}

/// Everything that determines one experiment, together with the buffer files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Demonstration sampling probability.
    pub p: f64,
    pub episodes: usize,
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
    pub mix_mode: MixMode,
    pub seed: u64,
    pub env: WorldConfig,
    pub agent: DdpgConfig,
    pub gradient_steps_per_episode: usize,
    pub explore_size: usize,
    pub demo_size: usize,
    pub mixed_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 0.0,
            episodes: 1000,
            checkpoint_every: 100,
            eval_episodes: 100,
            mix_mode: MixMode::Prebuilt,
            seed: 0,
            env: WorldConfig::default(),
            agent: DdpgConfig::default(),
            gradient_steps_per_episode: 150,
            explore_size: DEFAULT_CAPACITY,
            demo_size: DEFAULT_CAPACITY,
            mixed_size: DEFAULT_CAPACITY,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if !(0.0..=1.0).contains(&self.p) {
            return fail(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.episodes == 0 || self.checkpoint_every == 0 || !self.episodes.is_multiple_of(self.checkpoint_every) {
            return fail(format!(
                "checkpoint-every ({}) must be >= 1 and divide episodes ({})",
                self.checkpoint_every, self.episodes
            ));
        }
        if self.eval_episodes == 0 {
            return fail("eval-episodes must be >= 1".into());
        }
        for (name, n) in [("explore-size", self.explore_size), ("demo-size", self.demo_size), ("mixed-size", self.mixed_size)] {
            if n == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        self.env.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    pub fn checkpoint_count(&self) -> usize {
        self.episodes / self.checkpoint_every
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.checkpoint_count(), 10);
        assert_eq!(cfg.gradient_steps_per_episode, cfg.env.max_steps);
        assert_eq!(cfg.explore_size, 100_000);
        assert_eq!(cfg.demo_size, 100_000);
    }

    #[test]
    fn checkpoint_interval_must_divide() {
        let cfg = ExperimentConfig { episodes: 1000, checkpoint_every: 300, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let cfg = ExperimentConfig { p: 1.5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let cfg = ExperimentConfig { eval_episodes: 0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    }
}
