mod common;

use std::collections::BTreeSet;

use cogmap::harness::{oracle_steps, run_episode, transition_accuracy, PoseFrame, RunConfig};
use cogmap::inference::{infer_state, predict_pose, Belief, StepOutcome};
use cogmap::learning::{extend_map, update_on_step, LearningConfig};
use cogmap::model::{ModelSnapshot, StateStatus};
use cogmap::planner::{mutual_information, policy_posterior, step_efe, PlannerConfig};
use cogmap::roomworld::PRESETS;
use cogmap::{preset, Action, ObservationId, Pose, StateId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn env_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(PRESETS.to_vec())
}

fn action() -> impl Strategy<Value = Action> {
    prop::sample::select(Action::ALL.to_vec())
}

fn cardinal() -> impl Strategy<Value = Action> {
    prop::sample::select(Action::CARDINAL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pose_steps_invert(x in -50i32..50, y in -50i32..50, a in cardinal()) {
        let p = Pose::new(x, y);
        prop_assert_eq!(p.step(a).step(a.inverse()), p);
        prop_assert_eq!(p.step(Action::Stay), p);
    }

    #[test]
    fn closed_loop_returns_to_start(x in -50i32..50, y in -50i32..50) {
        let start = Pose::new(x, y);
        let end = [Action::North, Action::East, Action::South, Action::West]
            .into_iter()
            .fold(start, |p, a| predict_pose(p, a, true));
        prop_assert_eq!(end, start);
    }

    #[test]
    fn random_updates_keep_columns_normalized(seed in any::<u64>(), n in 1usize..=5, rounds in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = common::random_model(&mut rng, n, 3);
        let cfg = LearningConfig::default();
        for _ in 0..rounds {
            let pose = model.positions()[rng.gen_range(0..model.num_positions())];
            let k = model.num_states();
            let prev = Belief::from_probs(common::random_distribution(&mut rng, k), pose);
            let new = Belief::from_probs(common::random_distribution(&mut rng, k), pose);
            let a = Action::ALL[rng.gen_range(0..5)];
            let outcome = StepOutcome { moved: false, observation: ObservationId(rng.gen_range(0..3)), blocked_dirs: BTreeSet::new() };
            update_on_step(&mut model, &prev, a, &new, &outcome, &cfg, false);
            let blocked: BTreeSet<Action> = Action::CARDINAL.into_iter().filter(|_| rng.gen_bool(0.4)).collect();
            extend_map(&mut model, &new, &blocked, &cfg, false);
            if rng.gen_bool(0.3) {
                model.grow_observation(ObservationId(model.num_obs())).unwrap();
            }
            prop_assert!(model.max_column_error() <= 1e-9);
            prop_assert!(model.min_count() > 0.0);
        }
    }

    #[test]
    fn grow_state_dimensions_and_anchor_roundtrip(seed in any::<u64>(), extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = common::random_model(&mut rng, 1, 2);
        let before = model.num_states();
        let mut placed = Vec::new();
        for i in 0..extra {
            let pose = Pose::new(i as i32 + 1, rng.gen_range(-3..3));
            let (s, _) = model.grow_state(pose, StateStatus::Imagined).unwrap();
            placed.push((s, pose));
        }
        let n = before + extra;
        prop_assert_eq!(model.num_states(), n);
        for s in (0..n).map(StateId) {
            prop_assert_eq!(model.obs_counts(s).len(), model.num_obs());
            prop_assert_eq!(model.pos_counts(s).len(), model.num_positions());
            for a in Action::ALL {
                prop_assert_eq!(model.trans_counts(s, a).len(), n);
            }
        }
        for (s, pose) in placed {
            let column = model.pos_dist(s);
            let best = (0..column.len()).max_by(|&i, &j| column[i].total_cmp(&column[j])).unwrap();
            prop_assert_eq!(model.positions()[best], pose);
        }
    }

    #[test]
    fn inference_is_deterministic_and_proper(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng, n, 3);
        let pose = model.positions()[0];
        let prev = Belief::from_probs(common::random_distribution(&mut rng, n), pose);
        let outcome = StepOutcome { moved: true, observation: ObservationId(rng.gen_range(0..3)), blocked_dirs: BTreeSet::new() };
        let a = infer_state(&model, &prev, Action::East, &outcome).unwrap();
        let b = infer_state(&model, &prev, Action::East, &outcome).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.state_probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(a.state_probs.iter().all(|&p| p >= 0.0));
        prop_assert_eq!(a.confidence, a.state_probs.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn mutual_information_matches_enumeration(seed in any::<u64>(), n in 1usize..=6, m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng, n, m);
        let q = common::random_distribution(&mut rng, n);
        let got = mutual_information(&model.view(), &q);
        let want = common::brute_force_mutual_information(&model, &q);
        prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn softmax_is_proper_and_shift_invariant(g in prop::collection::vec(-50.0f64..50.0, 1..40), shift in -100.0f64..100.0, gamma in 0.0f64..16.0) {
        let p = policy_posterior(&g, gamma);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let shifted: Vec<f64> = g.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(policy_posterior(&shifted, gamma)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn lowering_g_never_lowers_probability(g in prop::collection::vec(-20.0f64..20.0, 2..30), pick in any::<prop::sample::Index>(), drop in 0.0f64..10.0, gamma in 0.0f64..16.0) {
        let i = pick.index(g.len());
        let before = policy_posterior(&g, gamma)[i];
        let mut lowered = g.clone();
        lowered[i] -= drop;
        prop_assert!(policy_posterior(&lowered, gamma)[i] >= before - 1e-12);
    }

    #[test]
    fn one_hot_update_sharpens_the_edge(seed in any::<u64>(), n in 2usize..=5, a in action()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = common::random_model(&mut rng, n, 3);
        let from = StateId(rng.gen_range(0..n));
        let to = StateId(rng.gen_range(0..n));
        let before = model.trans_prob(to, from, a);
        let pose = model.positions()[0];
        let prev = Belief::certain(from, n, pose);
        let new = Belief::certain(to, n, pose);
        let outcome = StepOutcome { moved: false, observation: ObservationId(0), blocked_dirs: BTreeSet::new() };
        update_on_step(&mut model, &prev, a, &new, &outcome, &LearningConfig::default(), false);
        prop_assert!(model.trans_prob(to, from, a) > before);
    }

    #[test]
    fn stepping_is_pure_and_moves_exactly_through_doors(env in env_name(), seed in any::<u64>(), a in action()) {
        let world = preset(env).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (state, _) = world.reset(&mut rng);
        let x = world.step(&state, a);
        prop_assert_eq!(&x, &world.step(&state, a));
        prop_assert_eq!(x.1.moved, a != Action::Stay && world.neighbor(state.agent_room, a).is_some());
        prop_assert!(world.is_room(x.0.agent_room.row as i64, x.0.agent_room.col as i64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episode_invariants(env in env_name(), seed in 0u64..1000, steps in 5usize..40) {
        let ep = common::drive(env, seed, steps);
        let model = ep.agent.model();

        // ids are stable and statuses only move Imagined -> Experienced
        for w in ep.anchors.windows(2) {
            prop_assert!(w[1].len() >= w[0].len());
            prop_assert_eq!(&w[1][..w[0].len()], &w[0][..]);
        }
        for w in ep.statuses.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(!(*a == StateStatus::Experienced && *b == StateStatus::Imagined));
            }
        }

        // every state's position column peaks at its anchor
        for (s, meta) in model.states().iter().enumerate() {
            let column = model.pos_dist(StateId(s));
            let best = (0..column.len()).max_by(|&i, &j| column[i].total_cmp(&column[j])).unwrap();
            prop_assert_eq!(model.positions()[best], meta.anchor);
        }

        // imagined states only appear behind real doors, so never more than the rooms
        prop_assert!(model.num_states() <= ep.world.num_rooms());

        // re-extending from the current belief changes nothing
        let mut again = model.clone();
        let blocked = &ep.percepts.last().unwrap().blocked_dirs;
        let created = extend_map(&mut again, ep.agent.belief(), blocked, &LearningConfig::default(), false);
        prop_assert_eq!(created, 0);
        prop_assert_eq!(&again, model);

        // replaying the action log reproduces the rooms and percepts
        let (mut state, first) = ep.world.reset_at(ep.start);
        prop_assert_eq!(&first, &ep.percepts[0]);
        for (i, &a) in ep.actions.iter().enumerate() {
            let (next, p) = ep.world.step(&state, a);
            state = next;
            prop_assert_eq!(state.agent_room, ep.rooms[i + 1]);
            prop_assert_eq!(&p, &ep.percepts[i + 1]);
        }

        // accuracy recomputed from the exported snapshot agrees
        let visited: BTreeSet<_> = ep.rooms.iter().copied().collect();
        let frame = PoseFrame { start: ep.start };
        let live = transition_accuracy(model, &ep.world, frame, &visited);
        let snap = ModelSnapshot::from_json(&model.snapshot().to_json()).unwrap();
        let exported = transition_accuracy(&snap, &ep.world, frame, &visited);
        prop_assert!((live - exported).abs() <= 1e-9);
    }

    #[test]
    fn imagined_states_are_more_novel(env in env_name(), seed in 0u64..1000, steps in 1usize..15) {
        let ep = common::drive(env, seed, steps);
        let model = ep.agent.model();
        let view = model.view();
        let n = model.num_states();
        let cfg = PlannerConfig::default();
        let one_hot = |s: usize| (0..n).map(|i| if i == s { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let of = |status| (0..n).filter(|&s| model.states()[s].status == status).collect::<Vec<_>>();
        for &i in &of(StateStatus::Imagined) {
            for &e in &of(StateStatus::Experienced) {
                prop_assert!(step_efe(&view, &one_hot(i), &cfg) < step_efe(&view, &one_hot(e), &cfg));
            }
        }
    }

    #[test]
    fn repeated_stay_never_lowers_confidence(env in env_name(), seed in 0u64..1000, steps in 1usize..25, stays in 1usize..6) {
        let mut ep = common::drive(env, seed, steps);
        let room = *ep.rooms.last().unwrap();
        let (state, _) = ep.world.reset_at(room);
        // the first Stay swaps the walked edge's prior for the Stay edge's;
        // from then on each repeat only reinforces the same evidence
        let (_, p) = ep.world.step(&state, Action::Stay);
        ep.agent.observe(Action::Stay, &p).unwrap();
        let mut last = ep.agent.belief().confidence;
        for _ in 0..stays {
            let (_, p) = ep.world.step(&state, Action::Stay);
            ep.agent.observe(Action::Stay, &p).unwrap();
            let c = ep.agent.belief().confidence;
            prop_assert!(c >= last - 1e-12, "{} -> {}", last, c);
            last = c;
        }
    }

    #[test]
    fn run_metrics_are_consistent(env in env_name(), seed in 0u64..1000) {
        let mut cfg = RunConfig::new(env, seed);
        cfg.max_steps = 120;
        let a = run_episode(&cfg).unwrap();
        let b = run_episode(&cfg).unwrap();
        prop_assert_eq!(a.actions(), b.actions());
        let world = preset(env).unwrap();
        if let Some(d) = a.steps_to_discovery {
            prop_assert!(d >= oracle_steps(&world, a.start_room).unwrap());
            if let Some(c) = a.steps_to_complete {
                prop_assert!(d <= c);
            }
        }
    }
}

#[test]
fn experienced_edges_dominate_imagined_after_one_traversal() {
    let world = preset("grid3x3").unwrap();
    let (state, first) = world.reset_at(cogmap::Room::new(1, 1));
    let mut agent = cogmap::Agent::new(&first, cogmap::AgentConfig::default());
    let (_, p) = world.step(&state, Action::East);
    agent.observe(Action::East, &p).unwrap();
    let model = agent.model();
    let here = model.state_at(Pose::ORIGIN).unwrap();
    let east = model.state_at(Pose::new(1, 0)).unwrap();
    let north = model.state_at(Pose::new(0, 1)).unwrap();
    // traversed edge versus a merely imagined one out of the same state
    let walked = model.trans_counts(here, Action::East)[east.0];
    let imagined = model.trans_counts(here, Action::North)[north.0];
    assert!(walked >= 10.0 * imagined, "{walked} vs {imagined}");
}
