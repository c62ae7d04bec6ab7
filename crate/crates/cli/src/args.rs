//! Command tree and config resolution. Every config key becomes a
//! `--<key>` flag on the subcommands that use it.

use std::path::PathBuf;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use demomix_core::config::{self, ConfigError, KEYS};
use demomix_core::harness::ExperimentConfig;

pub const RUN_DIR_ENV: &str = "DEMOMIX_RUN_DIR";
pub const DEFAULT_RUN_DIR: &str = "runs";
pub const DEFAULT_TAG: &str = "default";

fn config_args(skip: &[&str]) -> Vec<Arg> {
    KEYS.iter()
        .filter(|k| !skip.contains(&k.name))
        .map(|k| {
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .help(format!("{} [{}] (default: {})", k.help, k.unit, k.default_value()))
                .help_heading("Experiment config")
        })
        .collect()
}

fn common_args() -> Vec<Arg> {
    vec![
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .help("key = value file applied before individual flags"),
        Arg::new("tag")
            .long("tag")
            .value_name("NAME")
            .default_value(DEFAULT_TAG)
            .help(format!("run group under the output root (${RUN_DIR_ENV}, default `{DEFAULT_RUN_DIR}`)")),
    ]
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("PATH").value_parser(value_parser!(PathBuf)).help(help)
}

pub fn command() -> Command {
    Command::new("demomix")
        .about("Mixed demonstration/self-exploration replay for DDPG navigation experiments")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("collect-explore")
                .about("Run online DDPG and save its last explore-size transitions")
                .args(common_args())
                .args(config_args(&[]))
                .arg(path_arg("out", "buffer file (default: <root>/<tag>/buffers/explore_s<seed>.dmrb)")),
        )
        .subcommand(
            Command::new("collect-demo-scripted")
                .about("Record demo-size transitions from the scripted pilot")
                .args(common_args())
                .args(config_args(&[]))
                .arg(path_arg("out", "buffer file (default: <root>/<tag>/buffers/demo_s<seed>.dmrb)")),
        )
        .subcommand(
            Command::new("serve-demo")
                .about("Serve the live recording session over WebSocket")
                .args(common_args())
                .args(config_args(&[]))
                .arg(
                    Arg::new("addr")
                        .long("addr")
                        .value_name("HOST:PORT")
                        .default_value(demomix_demoserve::DEFAULT_ADDR)
                        .help("listen address"),
                )
                .arg(path_arg("out", "buffer file written on finish (default: <root>/<tag>/buffers/demo_s<seed>.dmrb)"))
                .arg(
                    Arg::new("target")
                        .long("target")
                        .value_name("EXPERIENCES")
                        .value_parser(value_parser!(usize))
                        .help("stop after this many experiences (default: demo-size)"),
                )
                .arg(
                    Arg::new("tick-rate")
                        .long("tick-rate")
                        .value_name("HZ")
                        .value_parser(value_parser!(f64))
                        .default_value("20")
                        .help("simulation ticks per second"),
                ),
        )
        .subcommand(
            Command::new("train")
                .about("Train from the mixed buffers, checkpoint, evaluate and write metrics.csv")
                .args(common_args())
                .args(config_args(&[]))
                .arg(path_arg("explore-buf", "self-exploration buffer (needed when p < 1)"))
                .arg(path_arg("demo-buf", "demonstration buffer (needed when p > 0)"))
                .arg(path_arg("out-dir", "run directory (default: <root>/<tag>/p<p>_s<seed>)")),
        )
        .subcommand(
            Command::new("evaluate")
                .about("Evaluate one checkpoint and print its metrics row")
                .arg(path_arg("checkpoint", "checkpoint file (.dmck)").required(true))
                .args(common_args())
                .args(config_args(&[]))
                .arg(path_arg("out", "also write the row as a one-line CSV file")),
        )
        .subcommand(
            Command::new("sweep")
                .about("Run one experiment per (p, seed), collecting missing buffers first")
                .args(common_args())
                .args(config_args(&["p", "seed"]))
                .arg(
                    Arg::new("p")
                        .long("p")
                        .value_name("P,...")
                        .value_delimiter(',')
                        .value_parser(value_parser!(f64))
                        .default_value("0,0.5,1")
                        .help("demonstration probabilities"),
                )
                .arg(
                    Arg::new("seed")
                        .long("seed")
                        .value_name("SEED,...")
                        .value_delimiter(',')
                        .value_parser(value_parser!(u64))
                        .action(ArgAction::Append)
                        .help("experiment seeds (required)"),
                )
                .arg(path_arg("explore-buf", "shared exploration buffer instead of the per-seed default"))
                .arg(path_arg("demo-buf", "shared demonstration buffer instead of the per-seed default"))
                .arg(
                    Arg::new("jobs")
                        .long("jobs")
                        .value_name("N")
                        .value_parser(value_parser!(usize))
                        .default_value("1")
                        .help("experiments run concurrently"),
                ),
        )
        .subcommand(
            Command::new("inspect-buffer")
                .about("Print a summary of a buffer file")
                .arg(path_arg("path", "buffer file (.dmrb)").required(true).long(None::<&str>).index(1)),
        )
}

/// Result of layering defaults, `--config` and flags.
pub struct Resolved {
    pub cfg: ExperimentConfig,
    /// Whether a seed was given explicitly, by flag or config file.
    pub seed_given: bool,
}

pub fn resolve(m: &ArgMatches, base: ExperimentConfig) -> Result<Resolved, ConfigError> {
    let mut cfg = base;
    let mut seed_given = false;
    if let Some(path) = m.get_one::<PathBuf>("config") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        for (key, value) in config::parse_pairs(&text)? {
            seed_given |= key == "seed";
            config::apply(&mut cfg, &key, &value)?;
        }
    }
    for k in KEYS {
        let Ok(Some(value)) = m.try_get_one::<String>(k.name) else { continue };
        seed_given |= k.name == "seed";
        k.set(&mut cfg, value)?;
    }
    Ok(Resolved { cfg, seed_given })
}

pub fn run_root() -> PathBuf {
    std::env::var_os(RUN_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_RUN_DIR))
}
