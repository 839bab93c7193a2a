//! Finite-horizon policy scoring by expected free energy and softmax
//! action selection.
//!
//! Every one of the `5^H` action sequences is scored. Rollouts share
//! prefixes through a depth-first walk, and the top-level branches are
//! scored in parallel when the `parallel` feature is on.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::inference::Belief;
use crate::model::{Action, ModelView, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub horizon: usize,
    /// Softmax precision on `-G`.
    pub gamma: f64,
    /// Weight of the count-inverse parameter-novelty bonus. Zero leaves only
    /// the state information-gain term.
    pub novelty_weight: f64,
    pub rng_seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 4,
            gamma: 8.0,
            novelty_weight: 1.0,
            rng_seed: 0,
        }
    }
}

/// Longest horizon accepted; `5^7` rollouts is already ~78k per step.
pub const MAX_HORIZON: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actions: Vec<Action>,
    pub efe: f64,
}

/// Predicted state and observation distributions at one rollout step.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

/// `q(s') = B[:, :, a] q(s)`, renormalized.
pub fn propagate(view: &ModelView, q: &[f64], action: Action) -> Vec<f64> {
    let slice = &view.b_s[action.index()];
    let mut next = vec![0.0; view.num_states()];
    for (column, &w) in slice.iter().zip(q) {
        if w == 0.0 {
            continue;
        }
        for (n, &b) in next.iter_mut().zip(column) {
            *n += w * b;
        }
    }
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|n| *n /= total);
    next
}

/// `q(o) = A_o q(s)`.
pub fn predict_observations(view: &ModelView, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; view.num_obs()];
    for (column, &w) in view.a_o.iter().zip(q) {
        if w == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(column) {
            *o += w * a;
        }
    }
    out
}

pub fn rollout(view: &ModelView, belief: &Belief, actions: &[Action]) -> Vec<RolloutStep> {
    let mut q = initial_states(view, belief);
    actions
        .iter()
        .map(|&a| {
            q = propagate(view, &q, a);
            RolloutStep {
                observations: predict_observations(view, &q),
                states: q.clone(),
            }
        })
        .collect()
}

fn initial_states(view: &ModelView, belief: &Belief) -> Vec<f64> {
    let mut q = belief.state_probs.clone();
    q.resize(view.num_states(), 0.0);
    q
}

/// Mutual information between the state and the observation it emits,
/// `sum_s q(s) sum_o A[o|s] ln(A[o|s] / q(o))`.
pub fn mutual_information(view: &ModelView, q: &[f64]) -> f64 {
    let q_o = predict_observations(view, q);
    let mut mi = 0.0;
    for (column, &w) in view.a_o.iter().zip(q) {
        if w == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (&a, &qo) in column.iter().zip(&q_o) {
            if a > 0.0 {
                inner += a * (a / qo).ln();
            }
        }
        mi += w * inner;
    }
    mi.max(0.0)
}

/// Expected count-inverse novelty `E_q[1 / sum_o counts[o, s]]`.
pub fn expected_novelty(view: &ModelView, q: &[f64]) -> f64 {
    q.iter().zip(&view.novelty).map(|(w, n)| w * n).sum()
}

/// Expected free energy of one predicted step. The utility term is zero:
/// the agent holds no preference over observations.
pub fn step_efe(view: &ModelView, q: &[f64], cfg: &PlannerConfig) -> f64 {
    let info = -mutual_information(view, q);
    if cfg.novelty_weight == 0.0 {
        info
    } else {
        info - cfg.novelty_weight * expected_novelty(view, q)
    }
}

/// `G(pi) = sum_tau G(pi, tau)` over the rollout from `belief`.
pub fn policy_efe(
    view: &ModelView,
    belief: &Belief,
    actions: &[Action],
    cfg: &PlannerConfig,
) -> f64 {
    let mut q = initial_states(view, belief);
    let mut g = 0.0;
    for &a in actions {
        q = propagate(view, &q, a);
        g += step_efe(view, &q, cfg);
    }
    g
}

fn expand(
    view: &ModelView,
    q: &[f64],
    g: f64,
    depth: usize,
    prefix: &mut Vec<Action>,
    cfg: &PlannerConfig,
    out: &mut Vec<Policy>,
) {
    if depth == 0 {
        out.push(Policy {
            actions: prefix.clone(),
            efe: g,
        });
        return;
    }
    for a in Action::ALL {
        let next = propagate(view, q, a);
        let g_next = g + step_efe(view, &next, cfg);
        prefix.push(a);
        expand(view, &next, g_next, depth - 1, prefix, cfg, out);
        prefix.pop();
    }
}

fn score_branch(view: &ModelView, q0: &[f64], first: Action, cfg: &PlannerConfig) -> Vec<Policy> {
    let q = propagate(view, q0, first);
    let g = step_efe(view, &q, cfg);
    let mut prefix = vec![first];
    let mut out = Vec::with_capacity(Action::COUNT.pow(cfg.horizon as u32 - 1));
    expand(view, &q, g, cfg.horizon - 1, &mut prefix, cfg, &mut out);
    out
}

/// Scores every policy of length `cfg.horizon` on a single thread.
/// Policies come back in lexicographic action order (`N < E < S < W < X`).
pub fn score_policies_sequential(
    view: &ModelView,
    belief: &Belief,
    cfg: &PlannerConfig,
) -> Vec<Policy> {
    assert!(
        (1..=MAX_HORIZON).contains(&cfg.horizon),
        "horizon out of range"
    );
    let q0 = initial_states(view, belief);
    Action::ALL
        .iter()
        .flat_map(|&a| score_branch(view, &q0, a, cfg))
        .collect()
}

/// Scores every policy, in the same order as [`score_policies_sequential`],
/// splitting the first action across the rayon pool.
#[cfg(feature = "parallel")]
pub fn score_policies_parallel(
    view: &ModelView,
    belief: &Belief,
    cfg: &PlannerConfig,
) -> Vec<Policy> {
    use rayon::prelude::*;

    assert!(
        (1..=MAX_HORIZON).contains(&cfg.horizon),
        "horizon out of range"
    );
    let q0 = initial_states(view, belief);
    let branches: Vec<Vec<Policy>> = Action::ALL
        .par_iter()
        .map(|&a| score_branch(view, &q0, a, cfg))
        .collect();
    branches.into_iter().flatten().collect()
}

pub fn score_policies(view: &ModelView, belief: &Belief, cfg: &PlannerConfig) -> Vec<Policy> {
    #[cfg(feature = "parallel")]
    {
        score_policies_parallel(view, belief, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        score_policies_sequential(view, belief, cfg)
    }
}

/// Softmax of `-gamma * G`.
pub fn policy_posterior(efes: &[f64], gamma: f64) -> Vec<f64> {
    let logits: Vec<f64> = efes.iter().map(|g| -gamma * g).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Samples a policy from the softmax posterior and returns its index and first action.
pub fn select_action<R: Rng + ?Sized>(
    policies: &[Policy],
    gamma: f64,
    rng: &mut R,
) -> (usize, Action) {
    assert!(!policies.is_empty(), "no candidate policies");
    let efes: Vec<f64> = policies.iter().map(|p| p.efe).collect();
    let probs = policy_posterior(&efes, gamma);
    let index = WeightedIndex::new(&probs)
        .expect("softmax weights are finite and positive")
        .sample(rng);
    (index, policies[index].actions[0])
}

/// One candidate policy with the poses its modal predicted states occupy.
#[derive(Debug, Clone, PartialEq)]
pub struct EfeFieldRow {
    pub actions: Vec<Action>,
    pub poses: Vec<Pose>,
    pub efe: f64,
}

/// Every candidate policy's imagined pose path and expected free energy.
pub fn dump_efe_field(view: &ModelView, belief: &Belief, cfg: &PlannerConfig) -> Vec<EfeFieldRow> {
    score_policies(view, belief, cfg)
        .into_iter()
        .map(|policy| {
            let poses = rollout(view, belief, &policy.actions)
                .iter()
                .map(|step| view.anchors[argmax(&step.states)])
                .collect();
            EfeFieldRow {
                actions: policy.actions,
                poses,
                efe: policy.efe,
            }
        })
        .collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
