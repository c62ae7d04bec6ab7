//! Offline training of a fresh agent from a mixed replay source.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use super::eval::{run_episode, EpisodeLog};
use super::{ExperimentConfig, HarnessError};
use crate::codec::write_atomic;
use crate::config::to_kv;
use crate::env2d::reset;
use crate::replay::{MixedSource, Source};
use crate::rng::{stream, Stream};
use crate::DdpgAgent;

/// Count of consumed minibatch entries per source tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SourceTally {
    pub exploration: u64,
    pub demonstration: u64,
}

impl SourceTally {
    pub fn total(&self) -> u64 {
        self.exploration + self.demonstration
    }

    pub fn demo_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.demonstration as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Episodes completed when the snapshot was taken.
    pub episode: usize,
    pub agent: DdpgAgent,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoints: Vec<Checkpoint>,
    pub consumed: SourceTally,
    /// One greedy rollout per episode; never fed back into training.
    pub monitor: Vec<EpisodeLog>,
}

pub fn checkpoint_file_name(episode: usize) -> String {
    format!("ckpt_e{episode:06}.dmck")
}

pub(crate) fn checkpoint_meta(episode: usize, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "episode-index = {episode}");
    out.push_str(&to_kv(cfg));
    out
}

/// Trains a fresh agent for `cfg.episodes` episodes of
/// `gradient_steps_per_episode` minibatch updates each. When `out_dir` is
/// given every snapshot is also written there with a `.meta` sidecar.
pub fn train_offline(
    source: &MixedSource<f64>,
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutput, HarnessError> {
    cfg.validate()?;
    let mut agent = DdpgAgent::new(cfg.agent, &mut stream(cfg.seed, Stream::Init))?;
    let mut minibatch = stream(cfg.seed, Stream::Minibatch);
    let mut monitor_layouts = stream(cfg.seed, Stream::Monitor);

    let mut consumed = SourceTally::default();
    let mut monitor = Vec::with_capacity(cfg.episodes);
    let mut checkpoints = Vec::with_capacity(cfg.checkpoint_count());
    for episode in 1..=cfg.episodes {
        let start = reset(&mut monitor_layouts, &cfg.env)?;
        monitor.push(run_episode(&start, &cfg.env, |o| agent.greedy(o))?);

        for _ in 0..cfg.gradient_steps_per_episode {
            let batch = source.sample(cfg.agent.batch_size, &mut minibatch)?;
            for e in &batch {
                match e.source {
                    Source::Exploration => consumed.exploration += 1,
                    Source::Demonstration => consumed.demonstration += 1,
                }
            }
            agent.train_step(&batch)?;
        }

        if episode % cfg.checkpoint_every == 0 {
            let path = match out_dir {
                Some(dir) => {
                    let path = dir.join(checkpoint_file_name(episode));
                    agent.save_checkpoint(&path)?;
                    let meta = path.with_extension("meta");
                    write_atomic(&meta, checkpoint_meta(episode, cfg).as_bytes())
                        .map_err(|e| HarnessError::io(&meta, e))?;
                    Some(path)
                }
                None => None,
            };
            let solved = monitor[monitor.len() - cfg.checkpoint_every..].iter().filter(|l| l.success).count();
            info!("episode {episode}/{}: checkpoint, {solved}/{} monitor rollouts solved", cfg.episodes, cfg.checkpoint_every);
            checkpoints.push(Checkpoint { episode, agent: agent.clone(), path });
        }
    }
    Ok(TrainOutput { checkpoints, consumed, monitor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{collect_demonstrations, ScriptedPilot};
    use crate::replay::{Experience, MixMode, ReplayBuffer};
    use crate::rng::seeded;

    fn small_cfg(p: f64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            p,
            seed: 2,
            episodes: 6,
            checkpoint_every: 2,
            gradient_steps_per_episode: 5,
            mixed_size: 500,
            ..Default::default()
        };
        cfg.agent.batch_size = 8;
        cfg
    }

    fn sources(cfg: &ExperimentConfig) -> (ReplayBuffer<f64>, ReplayBuffer<f64>) {
        let demo = collect_demonstrations(&mut ScriptedPilot, cfg, 400).unwrap();
        let mut explore = ReplayBuffer::new(400);
        explore.extend(demo.iter().map(|e| Experience { source: Source::Exploration, ..*e }));
        (explore, demo)
    }

    #[test]
    fn checkpoint_count_and_files() {
        let cfg = small_cfg(0.5);
        let (explore, demo) = sources(&cfg);
        let src = MixedSource::build(MixMode::Prebuilt, explore, demo, cfg.p, cfg.mixed_size, &mut seeded(0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = train_offline(&src, &cfg, Some(dir.path())).unwrap();
        assert_eq!(out.checkpoints.iter().map(|c| c.episode).collect::<Vec<_>>(), [2, 4, 6]);
        assert_eq!(out.monitor.len(), 6);
        assert_eq!(out.consumed.total(), 6 * 5 * 8);
        for c in &out.checkpoints {
            let path = c.path.as_ref().unwrap();
            let loaded = DdpgAgent::load_checkpoint(path, cfg.agent).unwrap();
            assert_eq!(loaded.actor, c.agent.actor);
            assert!(path.with_extension("meta").exists());
        }
    }

    #[test]
    fn pure_exploration_consumes_no_demonstrations() {
        let cfg = small_cfg(0.0);
        let (explore, demo) = sources(&cfg);
        for mode in [MixMode::Prebuilt, MixMode::Online] {
            let src = MixedSource::build(mode, explore.clone(), demo.clone(), 0.0, 500, &mut seeded(0)).unwrap();
            let out = train_offline(&src, &cfg, None).unwrap();
            assert_eq!(out.consumed.demonstration, 0);
            assert_eq!(out.consumed.exploration, 240);
        }
    }

    #[test]
    fn same_seed_same_checkpoint_bytes() {
        let cfg = small_cfg(1.0);
        let (explore, demo) = sources(&cfg);
        let src = MixedSource::build(MixMode::Online, explore, demo, 1.0, 500, &mut seeded(0)).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        train_offline(&src, &cfg, Some(a.path())).unwrap();
        train_offline(&src, &cfg, Some(b.path())).unwrap();
        for e in [2, 4, 6] {
            let name = checkpoint_file_name(e);
            assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
        }
    }
}
