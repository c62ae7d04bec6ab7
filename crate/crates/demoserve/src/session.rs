//! Tick-level recording state, independent of the network.

use std::path::Path;

use demomix_core::env2d::{observe, reset, step, EnvError, WorldConfig};
use demomix_core::keys::{keys_to_action, KeySet};
use demomix_core::replay::{save_buffer, Experience, FormatError, ReplayBuffer, Source};
use demomix_core::rng::{stream, SimRng, Stream};
use demomix_core::WorldState;

use crate::protocol::StateFrame;

/// One pilot's recording: the live world plus every transition taken so far.
pub struct Session {
    env: WorldConfig,
    layouts: SimRng,
    world: WorldState,
    tick: u64,
    episode: u64,
    buffer: ReplayBuffer<f64>,
    target: usize,
}

impl Session {
    /// Layouts come from the same seeded stream the scripted pilot uses.
    pub fn new(env: WorldConfig, seed: u64, target: usize) -> Result<Self, EnvError> {
        let mut layouts = stream(seed, Stream::Demonstration);
        let world = reset(&mut layouts, &env)?;
        Ok(Self { env, layouts, world, tick: 0, episode: 0, buffer: ReplayBuffer::new(target.max(1)), target })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn recorded(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffer(&self) -> &ReplayBuffer<f64> {
        &self.buffer
    }

    pub fn target_reached(&self) -> bool {
        self.buffer.len() >= self.target
    }

    /// Current world as a frame, without advancing.
    pub fn snapshot(&self) -> StateFrame {
        let reward = -self.world.goal_distance();
        StateFrame::from_world(&self.world, self.tick, reward, self.episode, false, false, self.recorded() as u64)
    }

    /// Steps with the held keys and records the transition. The returned
    /// frame shows the post-step world; a terminal step then resets.
    pub fn tick(&mut self, keys: KeySet) -> Result<StateFrame, EnvError> {
        let action = keys_to_action(keys);
        let out = step(&self.world, &action, &self.env)?;
        self.buffer.push(Experience {
            obs: observe(&self.world),
            action,
            reward: out.reward,
            next_obs: observe(&out.next_state),
            terminal: out.terminal,
            source: Source::Demonstration,
        });
        self.tick += 1;
        let frame = StateFrame::from_world(
            &out.next_state,
            self.tick,
            out.reward,
            self.episode,
            out.terminal,
            out.success,
            self.recorded() as u64,
        );
        if out.terminal {
            self.reset_layout()?;
        } else {
            self.world = out.next_state;
        }
        Ok(frame)
    }

    /// Abandons the current layout without recording anything.
    pub fn reset_layout(&mut self) -> Result<(), EnvError> {
        self.world = reset(&mut self.layouts, &self.env)?;
        self.episode += 1;
        Ok(())
    }

    pub fn flush(&self, path: &Path) -> Result<(), FormatError> {
        save_buffer(&self.buffer, path)
    }
}
