//! One (p, seed) experiment end to end, and the on-disk run layout:
//! `<root>/<tag>/buffers/{explore,demo}_s<seed>.dmrb` and
//! `<root>/<tag>/p<p>_s<seed>/{config.txt,metrics.csv,ckpt_e*.dmck}`.

use std::fs;
use std::path::{Path, PathBuf};

use super::eval::{evaluate_layouts, evaluation_layouts, EpisodeLog, MetricsRow, CSV_HEADER};
use super::train::{train_offline, SourceTally};
use super::{ExperimentConfig, HarnessError};
use crate::codec::write_atomic;
use crate::config::{apply_kv, to_kv};
use crate::replay::{load_buffer, MixedSource, ReplayBuffer};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferKind {
    Explore,
    Demo,
}

impl BufferKind {
    pub fn name(self) -> &'static str {
        match self {
            BufferKind::Explore => "explore",
            BufferKind::Demo => "demo",
        }
    }

    /// Subcommand that produces this buffer.
    pub fn command(self) -> &'static str {
        match self {
            BufferKind::Explore => "collect-explore",
            BufferKind::Demo => "collect-demo-scripted",
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            BufferKind::Explore => "--explore-buf",
            BufferKind::Demo => "--demo-buf",
        }
    }
}

pub fn buffer_path(root: &Path, tag: &str, kind: BufferKind, seed: u64) -> PathBuf {
    root.join(tag).join("buffers").join(format!("{}_s{seed}.dmrb", kind.name()))
}

pub fn run_dir(root: &Path, tag: &str, p: f64, seed: u64) -> PathBuf {
    root.join(tag).join(format!("p{p}_s{seed}"))
}

fn load_one(kind: BufferKind, path: Option<&Path>, needed: bool, seed: u64) -> Result<ReplayBuffer<f64>, HarnessError> {
    match path {
        Some(path) if path.exists() => Ok(load_buffer(path)?),
        Some(path) if needed => Err(HarnessError::MissingBuffer {
            kind: kind.name(),
            command: kind.command(),
            path: path.to_path_buf(),
            seed,
        }),
        None if needed => Err(HarnessError::Config(format!(
            "{} buffer required for this p; pass {} (create one with `demomix {}`)",
            kind.name(),
            kind.flag(),
            kind.command()
        ))),
        _ => Ok(ReplayBuffer::new(1)),
    }
}

/// Loads the buffers `cfg.p` draws from. A buffer the mix never touches may
/// be absent and comes back empty.
pub fn load_sources(
    cfg: &ExperimentConfig,
    explore: Option<&Path>,
    demo: Option<&Path>,
) -> Result<(ReplayBuffer<f64>, ReplayBuffer<f64>), HarnessError> {
    for (kind, path, needed) in [(BufferKind::Explore, explore, cfg.p < 1.0), (BufferKind::Demo, demo, cfg.p > 0.0)] {
        if path.is_none() && needed {
            load_one(kind, None, true, cfg.seed)?;
        }
    }
    Ok((
        load_one(BufferKind::Explore, explore, cfg.p < 1.0, cfg.seed)?,
        load_one(BufferKind::Demo, demo, cfg.p > 0.0, cfg.seed)?,
    ))
}

/// Reads a checkpoint `.meta` sidecar: the episode index and the full config.
pub fn read_checkpoint_meta(path: &Path) -> Result<(usize, ExperimentConfig), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut episode = None;
    let mut rest = String::new();
    for line in text.lines() {
        match line.split_once('=') {
            Some((k, v)) if k.trim() == "episode-index" => episode = v.trim().parse().ok(),
            _ => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    let episode = episode.ok_or_else(|| HarnessError::Config(format!("{}: missing episode-index", path.display())))?;
    let mut cfg = ExperimentConfig::default();
    apply_kv(&mut cfg, &rest).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    Ok((episode, cfg))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<MetricsRow>,
    /// Per-checkpoint evaluation episodes, aligned with `rows`.
    pub episodes: Vec<Vec<EpisodeLog>>,
    pub consumed: SourceTally,
    pub monitor: Vec<EpisodeLog>,
    pub csv_path: PathBuf,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Mixes the buffers for `cfg.p`, trains, evaluates every checkpoint and
/// writes `config.txt`, the checkpoints and `metrics.csv` under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    explore: ReplayBuffer<f64>,
    demo: ReplayBuffer<f64>,
    out_dir: &Path,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let echo = out_dir.join("config.txt");
    write_atomic(&echo, to_kv(cfg).as_bytes()).map_err(|e| HarnessError::io(&echo, e))?;

    let mut mixing = stream(cfg.seed, Stream::Mixing);
    let source = MixedSource::build(cfg.mix_mode, explore, demo, cfg.p, cfg.mixed_size, &mut mixing)?;
    let trained = train_offline(&source, cfg, Some(out_dir))?;

    let layouts = evaluation_layouts(cfg)?;
    let episodes: Vec<Vec<EpisodeLog>> = std::thread::scope(|scope| {
        let handles: Vec<_> = trained
            .checkpoints
            .iter()
            .map(|c| scope.spawn(|| evaluate_layouts(&c.agent, &layouts, &cfg.env)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect::<Result<_, _>>()
    })?;
    let rows: Vec<MetricsRow> = trained
        .checkpoints
        .iter()
        .zip(&episodes)
        .map(|(c, logs)| MetricsRow::from_logs(c.episode, logs, cfg.p, cfg.seed))
        .collect();

    let csv_path = out_dir.join("metrics.csv");
    write_metrics_csv(&csv_path, &rows)?;
    Ok(ExperimentReport {
        rows,
        episodes,
        consumed: trained.consumed,
        monitor: trained.monitor,
        csv_path,
        checkpoint_paths: trained.checkpoints.into_iter().filter_map(|c| c.path).collect(),
    })
}
