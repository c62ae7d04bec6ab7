use std::fmt;
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use log::info;

use demomix_core::config::{to_kv, ConfigError};
use demomix_core::harness::{
    buffer_path, collect_demonstrations, collect_exploration, evaluate_checkpoint, load_sources, read_checkpoint_meta,
    run_dir, run_experiment, BufferKind, ExperimentConfig, HarnessError, ScriptedPilot, CSV_HEADER,
};
use demomix_core::replay::{load_buffer, save_buffer, FormatError, ReplayBuffer, Source};
use demomix_demoserve::{serve_blocking, ServeConfig, ServeError};

use crate::args::{resolve, run_root, Resolved};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Harness(HarnessError),
    Format(FormatError),
    Serve(ServeError),
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Harness(e) => e.fmt(f),
            CliError::Format(e) => e.fmt(f),
            CliError::Serve(e) => e.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}
impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}
impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Format(e)
    }
}
impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        CliError::Serve(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn seeded_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let Resolved { cfg, seed_given } = resolve(m, ExperimentConfig::default())?;
    if !seed_given {
        return Err(CliError::Usage("--seed is required (or a `seed = N` line in --config)".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn tag(m: &ArgMatches) -> &str {
    m.get_one::<String>("tag").map(String::as_str).unwrap_or(crate::args::DEFAULT_TAG)
}

fn write_echo(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    std::fs::write(path, to_kv(cfg)).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// `X.dmrb` is echoed to `X.config.txt`.
fn buffer_echo_path(buffer: &Path) -> PathBuf {
    buffer.with_extension("config.txt")
}

fn save_collected(buf: &ReplayBuffer<f64>, out: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_echo(&buffer_echo_path(out), cfg)?;
    save_buffer(buf, out)?;
    println!("wrote {} experiences to {}", buf.len(), out.display());
    Ok(())
}

pub fn collect_explore(m: &ArgMatches) -> Result<()> {
    let cfg = seeded_config(m)?;
    let out = m
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| buffer_path(&run_root(), tag(m), BufferKind::Explore, cfg.seed));
    info!("collecting {} exploration transitions (seed {})", cfg.explore_size, cfg.seed);
    let buf = collect_exploration(&cfg)?;
    save_collected(&buf, &out, &cfg)
}

pub fn collect_demo_scripted(m: &ArgMatches) -> Result<()> {
    let cfg = seeded_config(m)?;
    let out = m
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| buffer_path(&run_root(), tag(m), BufferKind::Demo, cfg.seed));
    info!("recording {} scripted demonstration transitions (seed {})", cfg.demo_size, cfg.seed);
    let buf = collect_demonstrations(&mut ScriptedPilot, &cfg, cfg.demo_size)?;
    save_collected(&buf, &out, &cfg)
}

pub fn serve_demo(m: &ArgMatches) -> Result<()> {
    let cfg = seeded_config(m)?;
    let out = m
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| buffer_path(&run_root(), tag(m), BufferKind::Demo, cfg.seed));
    let target = m.get_one::<usize>("target").copied().unwrap_or(cfg.demo_size);
    let tick_rate = *m.get_one::<f64>("tick-rate").expect("defaulted");
    let addr = m.get_one::<String>("addr").expect("defaulted");
    write_echo(&buffer_echo_path(&out), &cfg)?;
    let summary =
        serve_blocking(addr, ServeConfig { env: cfg.env, seed: cfg.seed, out: out.clone(), target, tick_rate })?;
    println!("wrote {} experiences ({} episodes) to {}", summary.recorded, summary.episodes, summary.out.display());
    Ok(())
}

fn print_rows(report: &demomix_core::harness::ExperimentReport) {
    println!("{CSV_HEADER}");
    for row in &report.rows {
        println!("{}", row.to_csv());
    }
}

pub fn train(m: &ArgMatches) -> Result<()> {
    let cfg = seeded_config(m)?;
    let explore = m.get_one::<PathBuf>("explore-buf").map(PathBuf::as_path);
    let demo = m.get_one::<PathBuf>("demo-buf").map(PathBuf::as_path);
    let (explore, demo) = load_sources(&cfg, explore, demo)?;
    let out = m
        .get_one::<PathBuf>("out-dir")
        .cloned()
        .unwrap_or_else(|| run_dir(&run_root(), tag(m), cfg.p, cfg.seed));
    info!("training p={} seed={} into {}", cfg.p, cfg.seed, out.display());
    let report = run_experiment(&cfg, explore, demo, &out)?;
    print_rows(&report);
    println!("metrics: {}", report.csv_path.display());
    Ok(())
}

pub fn evaluate(m: &ArgMatches) -> Result<()> {
    let checkpoint = m.get_one::<PathBuf>("checkpoint").expect("required");
    let meta = checkpoint.with_extension("meta");
    let base = if meta.exists() { read_checkpoint_meta(&meta)?.1 } else { ExperimentConfig::default() };
    let Resolved { cfg, .. } = resolve(m, base)?;
    cfg.validate()?;
    let report = evaluate_checkpoint(checkpoint, &cfg)?;
    let line = report.row.to_csv();
    println!("{CSV_HEADER}\n{line}");
    if let Some(out) = m.get_one::<PathBuf>("out") {
        std::fs::write(out, format!("{CSV_HEADER}\n{line}\n")).map_err(|e| CliError::Io(out.clone(), e))?;
    }
    Ok(())
}

fn ensure_buffer(path: &Path, kind: BufferKind, cfg: &ExperimentConfig) -> Result<()> {
    if path.exists() {
        return Ok(());
    }
    info!("{} buffer missing at {}; collecting", kind.name(), path.display());
    let buf = match kind {
        BufferKind::Explore => collect_exploration(cfg)?,
        BufferKind::Demo => collect_demonstrations(&mut ScriptedPilot, cfg, cfg.demo_size)?,
    };
    save_collected(&buf, path, cfg)
}

pub fn sweep(m: &ArgMatches) -> Result<()> {
    let Resolved { cfg: base, .. } = resolve(m, ExperimentConfig::default())?;
    let ps: Vec<f64> = m.get_many::<f64>("p").expect("defaulted").copied().collect();
    let seeds: Vec<u64> = m.get_many::<u64>("seed").map(|v| v.copied().collect()).unwrap_or_default();
    if seeds.is_empty() {
        return Err(CliError::Usage("--seed is required (comma-separated list allowed)".into()));
    }
    let jobs = (*m.get_one::<usize>("jobs").expect("defaulted")).max(1);
    let root = run_root();
    let tag = tag(m);

    let mut runs = Vec::new();
    for &seed in &seeds {
        let seed_cfg = ExperimentConfig { seed, ..base.clone() };
        let explore = m.get_one::<PathBuf>("explore-buf").cloned();
        let demo = m.get_one::<PathBuf>("demo-buf").cloned();
        let explore = explore.unwrap_or_else(|| buffer_path(&root, tag, BufferKind::Explore, seed));
        let demo = demo.unwrap_or_else(|| buffer_path(&root, tag, BufferKind::Demo, seed));
        if ps.iter().any(|&p| p < 1.0) {
            ensure_buffer(&explore, BufferKind::Explore, &seed_cfg)?;
        }
        if ps.iter().any(|&p| p > 0.0) {
            ensure_buffer(&demo, BufferKind::Demo, &seed_cfg)?;
        }
        for &p in &ps {
            let cfg = ExperimentConfig { p, ..seed_cfg.clone() };
            cfg.validate()?;
            runs.push((cfg, explore.clone(), demo.clone()));
        }
    }

    let run_one = |(cfg, explore, demo): &(ExperimentConfig, PathBuf, PathBuf)| -> Result<PathBuf> {
        let (e, d) = load_sources(cfg, Some(explore), Some(demo))?;
        let out = run_dir(&root, tag, cfg.p, cfg.seed);
        info!("sweep: p={} seed={} -> {}", cfg.p, cfg.seed, out.display());
        Ok(run_experiment(cfg, e, d, &out)?.csv_path)
    };
    let mut csvs = Vec::with_capacity(runs.len());
    for chunk in runs.chunks(jobs) {
        let results: Vec<Result<PathBuf>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|r| s.spawn(|| run_one(r))).collect();
            handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
        });
        for r in results {
            csvs.push(r?);
        }
    }
    for csv in csvs {
        println!("metrics: {}", csv.display());
    }
    Ok(())
}

pub fn inspect_buffer(m: &ArgMatches) -> Result<()> {
    let path = m.get_one::<PathBuf>("path").expect("required");
    let buf: ReplayBuffer<f64> = load_buffer(path)?;
    let n = buf.len();
    let terminals = buf.iter().filter(|e| e.terminal).count();
    let binary = buf.iter().filter(|e| e.action.is_binary()).count();
    let mean_reward = if n == 0 { 0.0 } else { buf.iter().map(|e| e.reward).sum::<f64>() / n as f64 };
    println!("experiences      {n}");
    println!("exploration      {}", buf.count_source(Source::Exploration));
    println!("demonstration    {}", buf.count_source(Source::Demonstration));
    println!("terminal         {terminals}");
    println!("binary actions   {binary}");
    println!("mean reward      {mean_reward:.6}");
    Ok(())
}
