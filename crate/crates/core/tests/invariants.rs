use proptest::prelude::*;

use demomix_core::agent::DdpgConfig;
use demomix_core::env2d::{reset, step, Observation, WorldConfig, CONTACT_TOLERANCE, OBS_DIM};
use demomix_core::harness::{train_offline, ExperimentConfig};
use demomix_core::replay::{mix_prebuild, Experience, MixMode, MixedSource, ReplayBuffer, Source};
use demomix_core::rng::seeded;
use demomix_core::{Action, DdpgAgent, WorldState};

fn action() -> impl Strategy<Value = Action> {
    prop::array::uniform5(0.0..=1.0f64).prop_map(Action::clipped)
}

fn tagged(i: usize, source: Source) -> Experience<f64> {
    let mut obs = [0.0; OBS_DIM];
    obs[0] = i as f64;
    Experience {
        obs: Observation(obs),
        action: Action::noop(),
        reward: -(i as f64),
        next_obs: Observation(obs),
        terminal: false,
        source,
    }
}

fn filled(n: usize, source: Source) -> ReplayBuffer<f64> {
    let mut b = ReplayBuffer::new(n.max(1));
    b.extend((0..n).map(|i| tagged(i, source)));
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rollouts_stay_inside_and_never_penetrate(seed in any::<u64>(), actions in prop::collection::vec(action(), 1..150)) {
        let env = WorldConfig::default();
        let mut s: WorldState = reset(&mut seeded(seed), &env).unwrap();
        for a in &actions {
            if s.is_terminal(&env) {
                break;
            }
            let out = step(&s, a, &env).unwrap();
            prop_assert_eq!(out.next_state, step(&s, a, &env).unwrap().next_state);
            s = out.next_state;
            prop_assert!(s.agent_pos.x.abs() <= env.half_extent && s.agent_pos.y.abs() <= env.half_extent);
            prop_assert!(s.min_clearance(&env) >= -CONTACT_TOLERANCE);
            prop_assert_eq!(out.reward, -s.goal_distance());
        }
    }

    #[test]
    fn ring_buffer_keeps_the_newest(capacity in 1usize..64, n in 0usize..200) {
        let b = filled_with_capacity(capacity, n);
        prop_assert_eq!(b.len(), n.min(capacity));
        let first = n.saturating_sub(capacity);
        for (k, e) in b.iter().enumerate() {
            prop_assert_eq!(e.obs.0[0], (first + k) as f64);
        }
    }

    #[test]
    fn prebuilt_mix_draws_only_from_its_sources(p in 0.0..=1.0f64, seed in any::<u64>()) {
        let (explore, demo) = (filled(50, Source::Exploration), filled(30, Source::Demonstration));
        let mixed = mix_prebuild(&explore, &demo, p, 500, &mut seeded(seed)).unwrap();
        prop_assert_eq!(mixed.len(), 500);
        for e in mixed.iter() {
            let bound = if e.source == Source::Demonstration { 30.0 } else { 50.0 };
            prop_assert!(e.obs.0[0] < bound);
        }
        if p == 0.0 {
            prop_assert_eq!(mixed.count_source(Source::Demonstration), 0);
        }
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.dmck");
        let cfg = DdpgConfig::default();
        let agent = DdpgAgent::new(cfg, &mut seeded(seed)).unwrap();
        agent.save_checkpoint(&path).unwrap();
        let back = DdpgAgent::load_checkpoint(&path, cfg).unwrap();
        prop_assert_eq!(back.nets(), agent.nets());
    }
}

fn filled_with_capacity(capacity: usize, n: usize) -> ReplayBuffer<f64> {
    let mut b = ReplayBuffer::new(capacity);
    b.extend((0..n).map(|i| tagged(i, Source::Exploration)));
    b
}

#[test]
fn consumed_samples_match_p_within_three_sigma() {
    for p in [0.1, 0.5, 0.9] {
        let mut cfg = ExperimentConfig {
            p,
            seed: 4,
            episodes: 4,
            checkpoint_every: 2,
            gradient_steps_per_episode: 40,
            mix_mode: MixMode::Online,
            ..Default::default()
        };
        cfg.agent.batch_size = 64;
        let source = MixedSource::build(
            MixMode::Online,
            filled(500, Source::Exploration),
            filled(500, Source::Demonstration),
            p,
            1,
            &mut seeded(8),
        )
        .unwrap();
        let out = train_offline(&source, &cfg, None).unwrap();
        let n = out.consumed.total() as f64;
        assert_eq!(n, 4.0 * 40.0 * 64.0);
        let sigma = (p * (1.0 - p) / n).sqrt();
        let f = out.consumed.demo_fraction();
        assert!((f - p).abs() <= 3.0 * sigma, "p={p} consumed fraction {f}");
    }
}
