//! Reference implementations shared by the integration tests. Everything
//! here is written from raw pseudo-counts, independent of the library's
//! normalized views.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use cogmap::inference::Belief;
use cogmap::model::{CountPrior, StateStatus};
use cogmap::{Action, GenerativeModel, ObservationId, Pose, Room, RoomWorldSpec, StateId};
use rand::Rng;

/// Random model with `num_states` states on distinct poses and `num_obs`
/// observations, every count perturbed by a random positive amount.
pub fn random_model<R: Rng>(rng: &mut R, num_states: usize, num_obs: usize) -> GenerativeModel {
    let mut model = GenerativeModel::new(
        ObservationId(rng.gen_range(0..num_obs)),
        CountPrior::default(),
    );
    while model.num_obs() < num_obs {
        model
            .grow_observation(ObservationId(model.num_obs()))
            .unwrap();
    }
    let mut poses: Vec<Pose> = (-1..=1)
        .flat_map(|x| (-1..=1).map(move |y| Pose::new(x, y)))
        .filter(|&p| p != Pose::ORIGIN)
        .collect();
    while model.num_states() < num_states {
        let p = poses.swap_remove(rng.gen_range(0..poses.len()));
        let status = if rng.gen_bool(0.5) {
            StateStatus::Experienced
        } else {
            StateStatus::Imagined
        };
        model.grow_state(p, status).unwrap();
    }
    let scale = |rng: &mut R| {
        if rng.gen_bool(0.3) {
            rng.gen_range(0.0..20.0)
        } else {
            rng.gen_range(0.0..1.0)
        }
    };
    for s in (0..num_states).map(StateId) {
        for o in (0..num_obs).map(ObservationId) {
            let v = scale(rng);
            model.add_obs_count(o, s, v);
        }
        for p in 0..model.num_positions() {
            let v = scale(rng);
            model.add_pos_count(p, s, v);
        }
        for a in Action::ALL {
            for to in (0..num_states).map(StateId) {
                let v = scale(rng);
                model.add_trans_count(to, s, a, v);
            }
        }
    }
    model
}

pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    // occasionally sparse
    if n > 1 && rng.gen_bool(0.3) {
        let k = rng.gen_range(0..n);
        v[k] = 0.0;
    }
    if v.iter().sum::<f64>() == 0.0 {
        v[0] = 1.0;
    }
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

fn ratio(counts: &[f64], i: usize) -> f64 {
    counts[i] / counts.iter().sum::<f64>()
}

/// Posterior over states by enumerating every `(s_prev, s, p)` of the joint
/// `q(s_prev) P(s | s_prev, a) P(p | pose, a) P(o | s) P(p | s)`, where the
/// pose transition is a point mass at `predicted`.
pub fn brute_force_posterior(
    model: &GenerativeModel,
    prev: &[f64],
    action: Action,
    obs: ObservationId,
    predicted: Pose,
) -> Vec<f64> {
    let n = model.num_states();
    let eps = model.prior().epsilon;
    let mut joint = vec![0.0; n];
    for s in 0..n {
        let sid = StateId(s);
        let likelihood_o = ratio(model.obs_counts(sid), obs.0);
        // candidate positions: every registered pose, plus the predicted one
        // when it has never been registered
        let mut candidates: Vec<Option<usize>> = (0..model.num_positions()).map(Some).collect();
        if model.position_index(predicted).is_none() {
            candidates.push(None);
        }
        for p in candidates {
            let pose_here = p.map_or(predicted, |i| model.positions()[i]);
            let transition = if pose_here == predicted { 1.0 } else { 0.0 };
            let likelihood_p = match p {
                Some(i) => ratio(model.pos_counts(sid), i),
                None => {
                    let total: f64 = model.pos_counts(sid).iter().sum();
                    eps / (total + eps)
                }
            };
            for (sp, &w) in prev.iter().enumerate() {
                let b = ratio(model.trans_counts(StateId(sp), action), s);
                joint[s] += w * b * transition * likelihood_o * likelihood_p;
            }
        }
    }
    let z: f64 = joint.iter().sum();
    joint.iter().map(|j| j / z).collect()
}

/// `sum_o q(o) KL(q(s|o) || q(s))` from the raw observation counts.
pub fn brute_force_mutual_information(model: &GenerativeModel, q: &[f64]) -> f64 {
    let n = model.num_states();
    let m = model.num_obs();
    let a = |o: usize, s: usize| ratio(model.obs_counts(StateId(s)), o);
    let mut total = 0.0;
    for o in 0..m {
        let q_o: f64 = (0..n).map(|s| a(o, s) * q[s]).sum();
        if q_o == 0.0 {
            continue;
        }
        let mut kl = 0.0;
        for s in 0..n {
            let post = a(o, s) * q[s] / q_o;
            if post > 0.0 {
                kl += post * (post / q[s]).ln();
            }
        }
        total += q_o * kl;
    }
    total
}

/// Shortest walk entering every room, by iterative-deepening search over
/// raw action sequences.
pub fn brute_force_cover(spec: &RoomWorldSpec, start: Room) -> usize {
    fn search(spec: &RoomWorldSpec, at: Room, seen: &mut BTreeSet<Room>, left: usize) -> bool {
        if seen.len() == spec.num_rooms() {
            return true;
        }
        // each remaining room needs at least one more step
        if left < spec.num_rooms() - seen.len() {
            return false;
        }
        for a in Action::CARDINAL {
            if let Some(next) = spec.neighbor(at, a) {
                let fresh = seen.insert(next);
                let done = search(spec, next, seen, left - 1);
                if fresh {
                    seen.remove(&next);
                }
                if done {
                    return true;
                }
            }
        }
        false
    }
    (0..)
        .find(|&depth| search(spec, start, &mut BTreeSet::from([start]), depth))
        .unwrap()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn belief(probs: Vec<f64>, pose: Pose) -> Belief {
    Belief::from_probs(probs, pose)
}

/// Everything seen while driving an agent through `steps` planner steps.
pub struct Episode {
    pub world: RoomWorldSpec,
    pub agent: cogmap::Agent,
    pub start: Room,
    pub rooms: Vec<Room>,
    pub actions: Vec<Action>,
    pub percepts: Vec<cogmap::roomworld::Percept>,
    /// Anchor list after every step.
    pub anchors: Vec<Vec<Pose>>,
    pub statuses: Vec<Vec<StateStatus>>,
}

pub fn drive(env: &str, seed: u64, steps: usize) -> Episode {
    use rand::SeedableRng;
    let world = cogmap::preset(env).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut state, first) = world.reset(&mut rng);
    let start = state.agent_room;
    let mut agent =
        cogmap::Agent::new(&first, cogmap::AgentConfig::default()).with_invariant_checks(true);
    let mut ep = Episode {
        world: world.clone(),
        agent: agent.clone(),
        start,
        rooms: vec![start],
        actions: Vec::new(),
        percepts: vec![first],
        anchors: Vec::new(),
        statuses: Vec::new(),
    };
    for _ in 0..steps {
        let action = agent.plan(&mut rng);
        let (next, percept) = world.step(&state, action);
        state = next;
        agent.observe(action, &percept).unwrap();
        ep.rooms.push(state.agent_room);
        ep.actions.push(action);
        ep.percepts.push(percept);
        ep.anchors
            .push(agent.model().states().iter().map(|m| m.anchor).collect());
        ep.statuses
            .push(agent.model().states().iter().map(|m| m.status).collect());
    }
    ep.agent = agent;
    ep
}
