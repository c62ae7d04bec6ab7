//! Scripted demonstrator: a potential-field controller that presses arrow
//! keys, standing in for a human pilot in automated runs.

use super::{ExperimentConfig, HarnessError};
use crate::env2d::{observe, reset, step, WorldConfig};
use crate::keys::{keys_to_action, KeySet};
use crate::replay::{Experience, ReplayBuffer, Source};
use crate::rng::{stream, Stream};
use crate::{Action, Vec2, WorldState};

/// Obstacles whose centers are closer than this repel the pilot.
pub const REPULSION_RANGE: f64 = 0.3;
/// Scale of the `1/d²` repulsion term.
pub const REPULSION_GAIN: f64 = 0.05;
/// Steering component needed before a key is pressed.
pub const KEY_THRESHOLD: f64 = 0.1;

/// Source of binary keyboard-style actions for demonstration recording.
pub trait Pilot {
    fn action(&mut self, state: &WorldState, cfg: &WorldConfig) -> Action;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedPilot;

impl Pilot for ScriptedPilot {
    fn action(&mut self, state: &WorldState, cfg: &WorldConfig) -> Action {
        scripted_demonstrator(state, cfg)
    }
}

impl<F: FnMut(&WorldState, &WorldConfig) -> Action> Pilot for F {
    fn action(&mut self, state: &WorldState, cfg: &WorldConfig) -> Action {
        self(state, cfg)
    }
}

/// Goal attraction plus `1/d²` repulsion from nearby obstacles, quantized to
/// the arrow keys whose steering component exceeds [`KEY_THRESHOLD`].
pub fn scripted_demonstrator(state: &WorldState, _cfg: &WorldConfig) -> Action {
    let mut steer = state.goal_pos - state.agent_pos;
    for &c in &state.obstacles {
        let away: Vec2 = state.agent_pos - c;
        let d = away.norm();
        if d > 0.0 && d < REPULSION_RANGE {
            steer = steer + away * (REPULSION_GAIN / (d * d * d));
        }
    }
    keys_to_action(KeySet {
        right: steer.x > KEY_THRESHOLD,
        left: steer.x < -KEY_THRESHOLD,
        up: steer.y > KEY_THRESHOLD,
        down: steer.y < -KEY_THRESHOLD,
    })
}

/// Runs the pilot episode after episode until `n` transitions are recorded,
/// all tagged as demonstrations.
pub fn collect_demonstrations(
    pilot: &mut impl Pilot,
    cfg: &ExperimentConfig,
    n: usize,
) -> Result<ReplayBuffer<f64>, HarnessError> {
    cfg.env.validate()?;
    let mut layouts = stream(cfg.seed, Stream::Demonstration);
    let mut buffer = ReplayBuffer::new(n.max(1));
    let mut state: WorldState = reset(&mut layouts, &cfg.env)?;
    while buffer.len() < n {
        let action = pilot.action(&state, &cfg.env);
        let out = step(&state, &action, &cfg.env)?;
        buffer.push(Experience {
            obs: observe(&state),
            action,
            reward: out.reward,
            next_obs: observe(&out.next_state),
            terminal: out.terminal,
            source: Source::Demonstration,
        });
        state = if out.terminal { reset(&mut layouts, &cfg.env)? } else { out.next_state };
    }
    Ok(buffer)
}
