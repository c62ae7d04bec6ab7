//! Single-agent DDPG: deterministic actor, action-value critic, and
//! slowly tracking target copies of both.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::approx::{
    adam_step, load_nets, save_nets, AdamState, ApproxError, ForwardCache, Gradients, MlpParams, OutputActivation,
};
use crate::env2d::{Action, Observation, ACTION_DIM, OBS_DIM};
use crate::replay::{Experience, FormatError};
use crate::scalar::Scalar;

pub const HIDDEN_WIDTH: usize = 64;
pub const CRITIC_INPUT: usize = OBS_DIM + ACTION_DIM;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("non-finite {0}; parameters left untouched")]
    NonFinite(&'static str),
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("checkpoint holds {found} networks with shapes that do not form a DDPG agent: {detail}")]
    CheckpointLayout { found: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgConfig {
    pub gamma: f64,
    /// Soft-update rate for the target networks.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    /// Std-dev of the additive Gaussian exploration noise, action units.
    pub noise_sigma: f64,
    /// Transitions collected before online training starts.
    pub warmup: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self { gamma: 0.95, tau: 0.01, actor_lr: 1e-3, critic_lr: 1e-3, batch_size: 64, noise_sigma: 0.1, warmup: 1000 }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: String| Err(AgentError::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return fail(format!("{name} must be finite and >= 0, got {lr}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats<S> {
    pub critic_loss: S,
    pub actor_loss: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent<S> {
    pub actor: MlpParams<S>,
    pub critic: MlpParams<S>,
    pub target_actor: MlpParams<S>,
    pub target_critic: MlpParams<S>,
    pub actor_opt: AdamState<S>,
    pub critic_opt: AdamState<S>,
    pub cfg: DdpgConfig,
}

fn critic_input<S: Scalar>(obs: &[S], action: &[S]) -> Vec<S> {
    let mut x = Vec::with_capacity(obs.len() + action.len());
    x.extend_from_slice(obs);
    x.extend_from_slice(action);
    x
}

impl<S: Scalar> DdpgAgent<S> {
    /// Fresh agent with two 64-unit hidden layers; targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(cfg: DdpgConfig, rng: &mut R) -> Result<Self, AgentError> {
        Self::with_hidden_width(cfg, HIDDEN_WIDTH, rng)
    }

    pub fn with_hidden_width<R: Rng + ?Sized>(cfg: DdpgConfig, hidden: usize, rng: &mut R) -> Result<Self, AgentError> {
        let actor = MlpParams::init(&[(OBS_DIM, hidden), (hidden, hidden), (hidden, ACTION_DIM)], OutputActivation::Logistic, rng)?;
        let critic = MlpParams::init(&[(CRITIC_INPUT, hidden), (hidden, hidden), (hidden, 1)], OutputActivation::Identity, rng)?;
        Self::from_nets(cfg, actor.clone(), critic.clone(), actor, critic)
    }

    pub fn from_nets(
        cfg: DdpgConfig,
        actor: MlpParams<S>,
        critic: MlpParams<S>,
        target_actor: MlpParams<S>,
        target_critic: MlpParams<S>,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        let layout = |detail: String| AgentError::CheckpointLayout { found: 4, detail };
        if actor.input_dim() != OBS_DIM || actor.output_dim() != ACTION_DIM || actor.output_activation() != OutputActivation::Logistic {
            return Err(layout(format!("actor must map {OBS_DIM} -> {ACTION_DIM} with logistic output")));
        }
        if critic.input_dim() != CRITIC_INPUT || critic.output_dim() != 1 {
            return Err(layout(format!("critic must map {CRITIC_INPUT} -> 1")));
        }
        if target_actor.shapes() != actor.shapes() || target_critic.shapes() != critic.shapes() {
            return Err(layout("target shapes differ from online shapes".into()));
        }
        Ok(Self {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
            target_actor,
            target_critic,
            cfg,
        })
    }

    /// Noiseless policy output.
    pub fn greedy(&self, obs: &Observation<S>) -> Action<S> {
        let y = self.actor.predict(obs.as_slice()).expect("actor input is the observation size");
        Action::clipped(y.try_into().expect("actor output is the action size"))
    }

    /// Policy output plus i.i.d. Gaussian noise when exploring, clipped to `[0, 1]`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation<S>, explore: bool, rng: &mut R) -> Action<S> {
        let mut a = *self.greedy(obs).values();
        if explore {
            let noise = Normal::new(0.0, self.cfg.noise_sigma).expect("validated sigma");
            for v in &mut a {
                *v += S::lit(noise.sample(rng));
            }
        }
        Action::clipped(a)
    }

    /// `y = r + γ·(1 − terminal)·Q′(s′, μ′(s′))`, target networks only.
    pub fn critic_targets(&self, batch: &[Experience<S>]) -> Result<Vec<S>, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let gamma = S::lit(self.cfg.gamma);
        batch
            .iter()
            .map(|e| {
                if e.terminal {
                    return Ok(e.reward);
                }
                let next_action = self.target_actor.predict(e.next_obs.as_slice())?;
                let q = self.target_critic.predict(&critic_input(e.next_obs.as_slice(), &next_action))?[0];
                Ok(e.reward + gamma * q)
            })
            .collect()
    }

    pub fn q_value(&self, obs: &Observation<S>, action: &Action<S>) -> S {
        self.critic.predict(&critic_input(obs.as_slice(), action.values())).expect("critic input size")[0]
    }

    /// One Adam step on the mean squared Bellman error; returns the pre-step loss.
    pub fn update_critic(&mut self, batch: &[Experience<S>]) -> Result<S, AgentError> {
        let targets = self.critic_targets(batch)?;
        let n = S::from_usize(batch.len()).unwrap();
        let mut grads = Gradients::zeros_like(&self.critic);
        let mut loss = S::zero();
        for (e, &y) in batch.iter().zip(&targets) {
            let (q, cache) = self.critic.forward(&critic_input(e.obs.as_slice(), e.action.values()))?;
            let err = q[0] - y;
            loss += err * err;
            self.critic.backward_accumulate(&cache, &[(err + err) / n], &mut grads)?;
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite("critic loss"));
        }
        adam_step(&mut self.critic, &grads, &mut self.critic_opt, S::lit(self.cfg.critic_lr))?;
        Ok(loss)
    }

    /// `−mean Q(s, μ(s))` without touching any parameter.
    pub fn actor_loss(&self, batch: &[Experience<S>]) -> Result<S, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let mut total = S::zero();
        for e in batch {
            let a = self.actor.predict(e.obs.as_slice())?;
            total += self.critic.predict(&critic_input(e.obs.as_slice(), &a))?[0];
        }
        Ok(-total / S::from_usize(batch.len()).unwrap())
    }

    /// Deterministic policy gradient: the critic's input gradient restricted
    /// to the action coordinates, chained back through the actor.
    pub fn actor_gradient(&self, batch: &[Experience<S>]) -> Result<(S, Gradients<S>), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let n = S::from_usize(batch.len()).unwrap();
        let mut grads = Gradients::zeros_like(&self.actor);
        let mut total = S::zero();
        let dq = [-S::one() / n];
        for e in batch {
            let (a, actor_cache): (Vec<S>, ForwardCache<S>) = self.actor.forward(e.obs.as_slice())?;
            let (q, critic_cache) = self.critic.forward(&critic_input(e.obs.as_slice(), &a))?;
            total += q[0];
            let dx = self.critic.backward_input(&critic_cache, &dq)?;
            self.actor.backward_accumulate(&actor_cache, &dx[OBS_DIM..], &mut grads)?;
        }
        Ok((-total / n, grads))
    }

    /// One Adam step on the actor; the critic is read only.
    pub fn update_actor(&mut self, batch: &[Experience<S>]) -> Result<S, AgentError> {
        let (loss, grads) = self.actor_gradient(batch)?;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite("actor loss"));
        }
        adam_step(&mut self.actor, &grads, &mut self.actor_opt, S::lit(self.cfg.actor_lr))?;
        Ok(loss)
    }

    /// `θ′ ← τθ + (1 − τ)θ′` for both target networks.
    pub fn soft_update(&mut self) {
        let tau = S::lit(self.cfg.tau);
        self.target_actor.soft_update_from(&self.actor, tau);
        self.target_critic.soft_update_from(&self.critic, tau);
    }

    /// Critic step, then actor step, then soft update.
    pub fn train_step(&mut self, batch: &[Experience<S>]) -> Result<TrainStats<S>, AgentError> {
        let critic_loss = self.update_critic(batch)?;
        let actor_loss = self.update_actor(batch)?;
        self.soft_update();
        Ok(TrainStats { critic_loss, actor_loss })
    }

    /// Networks in checkpoint order: actor, critic, target actor, target critic.
    pub fn nets(&self) -> [&MlpParams<S>; 4] {
        [&self.actor, &self.critic, &self.target_actor, &self.target_critic]
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        Ok(save_nets(&self.nets(), path)?)
    }

    /// Restores networks; optimizer moments start fresh.
    pub fn load_checkpoint(path: impl AsRef<Path>, cfg: DdpgConfig) -> Result<Self, AgentError> {
        let nets: Vec<MlpParams<S>> = load_nets(path)?;
        let found = nets.len();
        let [actor, critic, target_actor, target_critic]: [MlpParams<S>; 4] = nets
            .try_into()
            .map_err(|_| AgentError::CheckpointLayout { found, detail: "expected 4 networks".into() })?;
        Self::from_nets(cfg, actor, critic, target_actor, target_critic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::Source;
    use crate::rng::seeded;

    fn experience(seed: u64, terminal: bool) -> Experience<f64> {
        let mut rng = seeded(seed);
        let mut obs = [0.0; OBS_DIM];
        let mut next = [0.0; OBS_DIM];
        obs.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        next.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let a: [f64; ACTION_DIM] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        Experience {
            obs: Observation(obs),
            action: Action::new(a).unwrap(),
            reward: -rng.random_range(0.0..2.0),
            next_obs: Observation(next),
            terminal,
            source: Source::Exploration,
        }
    }

    fn batch(n: usize, seed: u64) -> Vec<Experience<f64>> {
        (0..n).map(|i| experience(seed * 1000 + i as u64, i % 5 == 0)).collect()
    }

    fn agent(seed: u64) -> DdpgAgent<f64> {
        DdpgAgent::new(DdpgConfig::default(), &mut seeded(seed)).unwrap()
    }

    #[test]
    fn greedy_actions_are_deterministic_and_valid() {
        let ag = agent(0);
        let obs = batch(1, 1)[0].obs;
        let a = ag.act(&obs, false, &mut seeded(1));
        assert_eq!(a, ag.act(&obs, false, &mut seeded(2)));
        assert!(Action::new(*a.values()).is_ok());
    }

    #[test]
    fn zero_sigma_noise_is_greedy() {
        let mut ag = agent(0);
        ag.cfg.noise_sigma = 0.0;
        let obs = batch(1, 2)[0].obs;
        assert_eq!(ag.act(&obs, true, &mut seeded(3)), ag.act(&obs, false, &mut seeded(3)));
    }

    #[test]
    fn noisy_actions_stay_in_unit_box() {
        let mut ag = agent(1);
        ag.cfg.noise_sigma = 2.0;
        let obs = batch(1, 3)[0].obs;
        let mut rng = seeded(4);
        let mut saw_interior = false;
        for _ in 0..10_000 {
            let a = ag.act(&obs, true, &mut rng);
            assert!(a.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            saw_interior |= !a.is_binary();
        }
        assert!(saw_interior);
    }

    #[test]
    fn terminal_targets_truncate_bootstrap() {
        let ag = agent(2);
        let mut e = experience(5, true);
        e.reward = -0.05;
        assert_eq!(ag.critic_targets(&[e]).unwrap(), vec![-0.05]);
    }

    #[test]
    fn zero_discount_targets_are_rewards() {
        let mut ag = agent(3);
        ag.cfg.gamma = 0.0;
        let b = batch(16, 6);
        let y = ag.critic_targets(&b).unwrap();
        assert!(y.iter().zip(&b).all(|(y, e)| *y == e.reward));
    }

    #[test]
    fn empty_batches_are_rejected() {
        let mut ag = agent(4);
        assert!(matches!(ag.critic_targets(&[]), Err(AgentError::EmptyBatch)));
        assert!(matches!(ag.update_critic(&[]), Err(AgentError::EmptyBatch)));
        assert!(matches!(ag.update_actor(&[]), Err(AgentError::EmptyBatch)));
    }

    #[test]
    fn non_finite_loss_leaves_parameters() {
        let mut ag = agent(5);
        let mut b = batch(4, 7);
        b[1].reward = f64::NAN;
        b[1].terminal = true;
        let before = ag.clone();
        assert!(matches!(ag.update_critic(&b), Err(AgentError::NonFinite(_)) | Err(AgentError::Approx(_))));
        assert_eq!(ag, before);
    }

    #[test]
    fn config_validation() {
        for cfg in [
            DdpgConfig { gamma: 1.0, ..Default::default() },
            DdpgConfig { tau: 0.0, ..Default::default() },
            DdpgConfig { batch_size: 0, ..Default::default() },
            DdpgConfig { noise_sigma: -1.0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(AgentError::Config(_))));
        }
    }

    #[test]
    fn soft_update_scalar_example() {
        let mut ag = agent(6);
        ag.actor.params_mut().for_each(|v| *v = 1.0);
        ag.target_actor.params_mut().for_each(|v| *v = 0.0);
        ag.soft_update();
        assert!(ag.target_actor.params().all(|&v| v == 0.01));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.dmck");
        let mut ag = agent(7);
        ag.train_step(&batch(8, 8)).unwrap();
        ag.save_checkpoint(&path).unwrap();
        let back: DdpgAgent<f64> = DdpgAgent::load_checkpoint(&path, ag.cfg).unwrap();
        assert_eq!(back.nets(), ag.nets());
    }

    #[test]
    fn checkpoint_with_wrong_net_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.dmck");
        let ag = agent(8);
        save_nets(&[&ag.actor, &ag.critic], &path).unwrap();
        assert!(matches!(
            DdpgAgent::<f64>::load_checkpoint(&path, DdpgConfig::default()),
            Err(AgentError::CheckpointLayout { found: 2, .. })
        ));
    }
}
