//! Deterministic 2D particle navigation with circular obstacles.
//!
//! The agent is a damped point mass pushed by a 5-channel action
//! `[no-op, +x, -x, +y, -y]`. Obstacles are fixed for the lifetime of an
//! episode. The per-step reward is the negative Euclidean distance to the goal.

use std::collections::VecDeque;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

pub const N_OBSTACLES: usize = 9;
pub const OBS_DIM: usize = 4 + 2 * N_OBSTACLES;
pub const ACTION_DIM: usize = 5;

/// Attempts allowed for each rejection-sampled placement in [`reset`].
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Projection passes in [`resolve_collisions`].
pub const COLLISION_PASSES: usize = 8;
/// Resolution of the reachability grid used by [`path_exists`].
pub const REACHABILITY_GRID: usize = 200;
/// Slack allowed when checking non-penetration.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid world config: {field} {reason}")]
    Config { field: &'static str, reason: String },
    #[error("could not place {what} after {attempts} attempts; the world config is inconsistent")]
    Placement { what: &'static str, attempts: usize },
    #[error("step called on a terminal state (step {step})")]
    TerminalStep { step: usize },
    #[error("action component {index} = {value} outside [0, 1]")]
    InvalidAction { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Vec2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn dot(self, other: Self) -> S {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> S {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<S: Scalar> Mul<S> for Vec2<S> {
    type Output = Self;
    fn mul(self, rhs: S) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Geometry, dynamics and episode limits. Lengths are world units; the
/// world is the square `[-half_extent, half_extent]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    pub half_extent: f64,
    pub n_obstacles: usize,
    pub obstacle_radius: f64,
    pub agent_radius: f64,
    pub success_radius: f64,
    /// Integration step, time units.
    pub dt: f64,
    /// Fraction of velocity removed per step.
    pub damping: f64,
    /// Force units per action unit.
    pub accel_gain: f64,
    pub max_steps: usize,
    pub min_start_goal_dist: f64,
    /// Minimum distance between a spawned obstacle center and the agent start or goal.
    pub spawn_clearance: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            half_extent: 1.0,
            n_obstacles: N_OBSTACLES,
            obstacle_radius: 0.12,
            agent_radius: 0.05,
            success_radius: 0.10,
            dt: 0.1,
            damping: 0.25,
            accel_gain: 5.0,
            max_steps: 150,
            min_start_goal_dist: 0.8,
            spawn_clearance: 0.25,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Result<(), EnvError> {
            Err(EnvError::Config { field, reason: reason.into() })
        }
        let positive = [
            ("half_extent", self.half_extent),
            ("obstacle_radius", self.obstacle_radius),
            ("agent_radius", self.agent_radius),
            ("success_radius", self.success_radius),
            ("dt", self.dt),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return bad(field, format!("must be finite and > 0, got {value}"));
            }
        }
        for (field, value) in [
            ("accel_gain", self.accel_gain),
            ("min_start_goal_dist", self.min_start_goal_dist),
            ("spawn_clearance", self.spawn_clearance),
        ] {
            if !value.is_finite() {
                return bad(field, format!("must be finite, got {value}"));
            }
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping", format!("must lie in [0, 1), got {}", self.damping));
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be >= 1");
        }
        if self.n_obstacles != N_OBSTACLES {
            return bad(
                "n_obstacles",
                format!("observation layout is fixed to {N_OBSTACLES} obstacles, got {}", self.n_obstacles),
            );
        }
        if self.min_start_goal_dist >= 2.0 * self.half_extent {
            return bad(
                "min_start_goal_dist",
                format!("must be < 2*half_extent = {}, got {}", 2.0 * self.half_extent, self.min_start_goal_dist),
            );
        }
        Ok(())
    }

    /// Center-to-center distance at which the agent touches an obstacle.
    pub fn contact_distance(&self) -> f64 {
        self.obstacle_radius + self.agent_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldState<S> {
    pub agent_pos: Vec2<S>,
    pub agent_vel: Vec2<S>,
    pub goal_pos: Vec2<S>,
    pub obstacles: [Vec2<S>; N_OBSTACLES],
    pub step: usize,
}

impl<S: Scalar> WorldState<S> {
    pub fn goal_distance(&self) -> S {
        self.agent_pos.distance(self.goal_pos)
    }

    /// Smallest `distance - contact_distance` over all obstacles.
    pub fn min_clearance(&self, cfg: &WorldConfig) -> S {
        let reach = S::lit(cfg.contact_distance());
        self.obstacles
            .iter()
            .map(|&c| self.agent_pos.distance(c) - reach)
            .fold(S::infinity(), S::min)
    }

    pub fn is_success(&self, cfg: &WorldConfig) -> bool {
        self.goal_distance() < S::lit(cfg.success_radius)
    }

    pub fn is_terminal(&self, cfg: &WorldConfig) -> bool {
        self.step >= cfg.max_steps || self.is_success(cfg)
    }
}

/// Agent-centric encoding: `[vx, vy, goal - pos, obstacle_i - pos ...]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<S>(pub [S; OBS_DIM]);

impl<S: Scalar> Observation<S> {
    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn velocity(&self) -> Vec2<S> {
        Vec2::new(self.0[0], self.0[1])
    }

    pub fn goal_offset(&self) -> Vec2<S> {
        Vec2::new(self.0[2], self.0[3])
    }

    pub fn obstacle_offset(&self, i: usize) -> Vec2<S> {
        Vec2::new(self.0[4 + 2 * i], self.0[5 + 2 * i])
    }
}

/// Five components in `[0, 1]`: `[no-op, +x, -x, +y, -y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action<S>([S; ACTION_DIM]);

impl<S: Scalar> Action<S> {
    pub fn new(values: [S; ACTION_DIM]) -> Result<Self, EnvError> {
        for (index, &v) in values.iter().enumerate() {
            if !(v >= S::zero() && v <= S::one()) {
                return Err(EnvError::InvalidAction { index, value: v.to_f64_lossy() });
            }
        }
        Ok(Self(values))
    }

    /// Clamps every component into `[0, 1]`; NaN maps to 0.
    pub fn clipped(values: [S; ACTION_DIM]) -> Self {
        Self(values.map(|v| v.max(S::zero()).min(S::one())))
    }

    pub fn noop() -> Self {
        let mut a = [S::zero(); ACTION_DIM];
        a[0] = S::one();
        Self(a)
    }

    pub fn values(&self) -> &[S; ACTION_DIM] {
        &self.0
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&v| v == S::zero() || v == S::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: WorldState<S>,
    pub reward: S,
    pub terminal: bool,
    pub success: bool,
}

fn sample_point<S: Scalar, R: Rng + ?Sized>(rng: &mut R, half: f64) -> Vec2<S> {
    let x = rng.random_range(-half..=half);
    let y = rng.random_range(-half..=half);
    Vec2::new(S::lit(x), S::lit(y))
}

/// Samples a fresh layout: start and goal at least `min_start_goal_dist`
/// apart, obstacles kept `spawn_clearance` away from both. Obstacles may
/// overlap each other and may cut the goal off entirely.
pub fn reset<S: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &WorldConfig) -> Result<WorldState<S>, EnvError> {
    cfg.validate()?;
    let half = 0.8 * cfg.half_extent;
    let min_dist = S::lit(cfg.min_start_goal_dist);
    let clearance = S::lit(cfg.spawn_clearance);

    let (agent_pos, goal_pos) = (0..MAX_PLACEMENT_ATTEMPTS)
        .map(|_| (sample_point::<S, R>(rng, half), sample_point::<S, R>(rng, half)))
        .find(|(a, g)| a.distance(*g) >= min_dist)
        .ok_or(EnvError::Placement { what: "agent and goal", attempts: MAX_PLACEMENT_ATTEMPTS })?;

    let mut obstacles = [Vec2::zero(); N_OBSTACLES];
    for slot in obstacles.iter_mut() {
        *slot = (0..MAX_PLACEMENT_ATTEMPTS)
            .map(|_| sample_point::<S, R>(rng, half))
            .find(|c| c.distance(agent_pos) >= clearance && c.distance(goal_pos) >= clearance)
            .ok_or(EnvError::Placement { what: "obstacle", attempts: MAX_PLACEMENT_ATTEMPTS })?;
    }

    Ok(WorldState { agent_pos, agent_vel: Vec2::zero(), goal_pos, obstacles, step: 0 })
}

pub fn observe<S: Scalar>(state: &WorldState<S>) -> Observation<S> {
    let mut v = [S::zero(); OBS_DIM];
    let pos = state.agent_pos;
    v[0] = state.agent_vel.x;
    v[1] = state.agent_vel.y;
    let goal = state.goal_pos - pos;
    v[2] = goal.x;
    v[3] = goal.y;
    for (i, &c) in state.obstacles.iter().enumerate() {
        let rel = c - pos;
        v[4 + 2 * i] = rel.x;
        v[5 + 2 * i] = rel.y;
    }
    Observation(v)
}

/// Channel 0 is a no-op and never contributes.
pub fn action_to_force<S: Scalar>(action: &Action<S>, cfg: &WorldConfig) -> Vec2<S> {
    let a = action.values();
    Vec2::new(a[1] - a[2], a[3] - a[4]) * S::lit(cfg.accel_gain)
}

/// Pushes the agent out of every overlapping obstacle, nearest first, and
/// removes the inward normal component of its velocity.
pub fn resolve_collisions<S: Scalar>(state: &WorldState<S>, cfg: &WorldConfig) -> WorldState<S> {
    let reach = S::lit(cfg.contact_distance());
    let mut out = *state;
    for _ in 0..COLLISION_PASSES {
        let mut overlapping: Vec<(S, usize)> = out
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, &c)| (out.agent_pos.distance(c), i))
            .filter(|&(d, _)| d < reach)
            .collect();
        if overlapping.is_empty() {
            break;
        }
        overlapping.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        for (_, i) in overlapping {
            let center = out.obstacles[i];
            let offset = out.agent_pos - center;
            let d = offset.norm();
            if d >= reach {
                continue;
            }
            let normal = if d > S::zero() { offset * (S::one() / d) } else { Vec2::new(S::one(), S::zero()) };
            out.agent_pos = center + normal * reach;
            let inward = out.agent_vel.dot(normal);
            if inward < S::zero() {
                out.agent_vel = out.agent_vel - normal * inward;
            }
        }
    }
    out
}

fn clamp_to_world<S: Scalar>(state: &mut WorldState<S>, half: S) {
    if state.agent_pos.x < -half || state.agent_pos.x > half {
        state.agent_pos.x = state.agent_pos.x.max(-half).min(half);
        state.agent_vel.x = S::zero();
    }
    if state.agent_pos.y < -half || state.agent_pos.y > half {
        state.agent_pos.y = state.agent_pos.y.max(-half).min(half);
        state.agent_vel.y = S::zero();
    }
}

/// Advances one step: damped integration, contact resolution, wall clamp.
///
/// If eight projection passes cannot free the agent (it was driven into a
/// crevice between overlapping obstacles) the agent stays at its previous
/// position with zero velocity.
pub fn step<S: Scalar>(state: &WorldState<S>, action: &Action<S>, cfg: &WorldConfig) -> Result<StepOutcome<S>, EnvError> {
    if state.is_terminal(cfg) {
        return Err(EnvError::TerminalStep { step: state.step });
    }
    let dt = S::lit(cfg.dt);
    let force = action_to_force(action, cfg);

    let mut next = *state;
    next.agent_vel = state.agent_vel * (S::one() - S::lit(cfg.damping)) + force * dt;
    next.agent_pos = state.agent_pos + next.agent_vel * dt;
    next = resolve_collisions(&next, cfg);
    clamp_to_world(&mut next, S::lit(cfg.half_extent));
    if next.min_clearance(cfg) < -S::lit(CONTACT_TOLERANCE) {
        next.agent_pos = state.agent_pos;
        next.agent_vel = Vec2::zero();
    }
    next.step = state.step + 1;

    let distance = next.goal_distance();
    let success = distance < S::lit(cfg.success_radius);
    Ok(StepOutcome {
        next_state: next,
        reward: -distance,
        terminal: success || next.step >= cfg.max_steps,
        success,
    })
}

/// Grid reachability oracle: 4-connected BFS over cell centers that keep a
/// full contact distance from every obstacle.
pub fn path_exists<S: Scalar>(state: &WorldState<S>, cfg: &WorldConfig) -> bool {
    const N: usize = REACHABILITY_GRID;
    let half = cfg.half_extent;
    let cell = 2.0 * half / N as f64;
    let reach = cfg.contact_distance();
    let obstacles: Vec<(f64, f64)> =
        state.obstacles.iter().map(|c| (c.x.to_f64_lossy(), c.y.to_f64_lossy())).collect();

    let center = |i: usize| -half + (i as f64 + 0.5) * cell;
    let free: Vec<bool> = (0..N * N)
        .map(|k| {
            let (cx, cy) = (center(k % N), center(k / N));
            obstacles.iter().all(|&(ox, oy)| (cx - ox).hypot(cy - oy) >= reach)
        })
        .collect();

    let cell_of = |p: Vec2<S>| -> usize {
        let idx = |v: f64| (((v + half) / cell).floor().max(0.0) as usize).min(N - 1);
        idx(p.y.to_f64_lossy()) * N + idx(p.x.to_f64_lossy())
    };
    let start = cell_of(state.agent_pos);
    let goal = cell_of(state.goal_pos);
    if !free[start] || !free[goal] {
        return false;
    }

    let mut seen = vec![false; N * N];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(k) = queue.pop_front() {
        if k == goal {
            return true;
        }
        let (x, y) = (k % N, k / N);
        let neighbors = [
            (x > 0).then(|| k - 1),
            (x + 1 < N).then(|| k + 1),
            (y > 0).then(|| k - N),
            (y + 1 < N).then(|| k + N),
        ];
        for n in neighbors.into_iter().flatten() {
            if free[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    false
}
