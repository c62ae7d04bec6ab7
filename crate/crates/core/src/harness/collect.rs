//! Self-exploration buffer collection with standard online DDPG.

use super::{ExperimentConfig, HarnessError};
use crate::env2d::{observe, reset, step};
use crate::replay::{Experience, ReplayBuffer, Source};
use crate::rng::{stream, Stream};
use crate::{DdpgAgent, WorldState};

/// Runs online DDPG with exploration noise until `cfg.explore_size`
/// transitions are recorded. Training starts once `warmup` transitions are
/// stored and samples from the same buffer that is returned.
pub fn collect_exploration(cfg: &ExperimentConfig) -> Result<ReplayBuffer<f64>, HarnessError> {
    cfg.env.validate()?;
    let n = cfg.explore_size;
    if n == 0 {
        return Err(HarnessError::Config("explore-size must be >= 1".into()));
    }
    let mut agent = DdpgAgent::new(cfg.agent, &mut stream(cfg.seed, Stream::Init))?;
    let mut layouts = stream(cfg.seed, Stream::Layouts);
    let mut noise = stream(cfg.seed, Stream::Exploration);
    let mut minibatch = stream(cfg.seed, Stream::Minibatch);

    let mut buffer = ReplayBuffer::new(n);
    let mut state: WorldState = reset(&mut layouts, &cfg.env)?;
    for _ in 0..n {
        let obs = observe(&state);
        let action = agent.act(&obs, true, &mut noise);
        let out = step(&state, &action, &cfg.env)?;
        buffer.push(Experience {
            obs,
            action,
            reward: out.reward,
            next_obs: observe(&out.next_state),
            terminal: out.terminal,
            source: Source::Exploration,
        });
        if buffer.len() >= cfg.agent.warmup.max(1) {
            let batch = buffer.sample_uniform(cfg.agent.batch_size, &mut minibatch)?;
            agent.train_step(&batch)?;
        }
        state = if out.terminal { reset(&mut layouts, &cfg.env)? } else { out.next_state };
    }
    Ok(buffer)
}
