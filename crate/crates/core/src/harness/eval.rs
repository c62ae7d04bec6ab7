//! Noiseless checkpoint evaluation and the per-checkpoint metrics row.

use std::path::Path;

use super::{read_checkpoint_meta, ExperimentConfig, HarnessError};
use crate::env2d::{observe, path_exists, reset, step, WorldConfig};
use crate::rng::{stream, Stream};
use crate::{Action, DdpgAgent, Observation, WorldState};

pub const CSV_HEADER: &str = "episode,success_rate,mean_steps_success,n_eval,p,seed";

/// Outcome of one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeLog {
    pub success: bool,
    /// Steps taken until success or the step cap.
    pub steps: usize,
    /// Whether the layout admitted a collision-free path at reset.
    pub solvable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    /// Percentage in `[0, 100]`.
    pub success_rate: f64,
    /// `None` when no episode succeeded.
    pub mean_steps_success: Option<f64>,
    pub n_eval: usize,
    pub p: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn from_logs(episode: usize, logs: &[EpisodeLog], p: f64, seed: u64) -> Self {
        let wins: Vec<usize> = logs.iter().filter(|l| l.success).map(|l| l.steps).collect();
        let success_rate = if logs.is_empty() { 0.0 } else { 100.0 * wins.len() as f64 / logs.len() as f64 };
        let mean_steps_success =
            (!wins.is_empty()).then(|| wins.iter().sum::<usize>() as f64 / wins.len() as f64);
        Self { episode, success_rate, mean_steps_success, n_eval: logs.len(), p, seed }
    }

    /// One CSV line without the trailing newline; an undefined mean is an empty field.
    pub fn to_csv(&self) -> String {
        let mean = self.mean_steps_success.map(|m| m.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.episode, self.success_rate, mean, self.n_eval, self.p, self.seed)
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            episode: f[0].parse().ok()?,
            success_rate: f[1].parse().ok()?,
            mean_steps_success: if f[2].is_empty() { None } else { Some(f[2].parse().ok()?) },
            n_eval: f[3].parse().ok()?,
            p: f[4].parse().ok()?,
            seed: f[5].parse().ok()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub row: MetricsRow,
    pub episodes: Vec<EpisodeLog>,
}

/// The fixed layouts every checkpoint of one experiment is scored on.
pub fn evaluation_layouts(cfg: &ExperimentConfig) -> Result<Vec<WorldState>, HarnessError> {
    let mut rng = stream(cfg.seed, Stream::Evaluation);
    (0..cfg.eval_episodes).map(|_| Ok(reset(&mut rng, &cfg.env)?)).collect()
}

/// Rolls `policy` from `start` until success or the step cap.
pub fn run_episode(
    start: &WorldState,
    env: &WorldConfig,
    mut policy: impl FnMut(&Observation) -> Action,
) -> Result<EpisodeLog, HarnessError> {
    let solvable = path_exists(start, env);
    let mut state = *start;
    let mut steps = 0;
    while !state.is_terminal(env) {
        let out = step(&state, &policy(&observe(&state)), env)?;
        steps += 1;
        state = out.next_state;
        if out.success {
            return Ok(EpisodeLog { success: true, steps, solvable });
        }
    }
    Ok(EpisodeLog { success: state.is_success(env), steps, solvable })
}

pub fn evaluate_layouts(
    agent: &DdpgAgent,
    layouts: &[WorldState],
    env: &WorldConfig,
) -> Result<Vec<EpisodeLog>, HarnessError> {
    layouts.iter().map(|s| run_episode(s, env, |o| agent.greedy(o))).collect()
}

/// Scores `agent` without exploration noise on the evaluation stream.
pub fn evaluate(agent: &DdpgAgent, episode: usize, cfg: &ExperimentConfig) -> Result<EvalReport, HarnessError> {
    let episodes = evaluate_layouts(agent, &evaluation_layouts(cfg)?, &cfg.env)?;
    Ok(EvalReport { row: MetricsRow::from_logs(episode, &episodes, cfg.p, cfg.seed), episodes })
}

/// Loads a checkpoint file and evaluates it. The episode index comes from
/// the `.meta` sidecar when one exists, otherwise 0.
pub fn evaluate_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<EvalReport, HarnessError> {
    let agent = DdpgAgent::load_checkpoint(path, cfg.agent)?;
    let meta = path.with_extension("meta");
    let episode = if meta.exists() { read_checkpoint_meta(&meta)?.0 } else { 0 };
    evaluate(&agent, episode, cfg)
}
