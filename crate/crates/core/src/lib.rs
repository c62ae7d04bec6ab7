//! Mixed demonstration/self-exploration experience replay for DDPG on a 2D
//! obstacle-navigation task.
//!
//! The numeric core ([`env2d`], [`approx`], [`agent`], [`replay`]) is generic
//! over [`Scalar`]; the experiment [`harness`] and the file formats work in
//! `f64`, exposed through the aliases below.

pub mod agent;
pub mod approx;
mod codec;
pub mod config;
pub mod env2d;
pub mod harness;
pub mod keys;
pub mod replay;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

pub type Real = f64;
pub type Vec2 = env2d::Vec2<Real>;
pub type WorldState = env2d::WorldState<Real>;
pub type Observation = env2d::Observation<Real>;
pub type Action = env2d::Action<Real>;
pub type StepOutcome = env2d::StepOutcome<Real>;
pub type Experience = replay::Experience<Real>;
pub type ReplayBuffer = replay::ReplayBuffer<Real>;
pub type MixedSource = replay::MixedSource<Real>;
pub type Mlp = approx::MlpParams<Real>;
pub type Gradients = approx::Gradients<Real>;
pub type AdamState = approx::AdamState<Real>;
pub type DdpgAgent = agent::DdpgAgent<Real>;
