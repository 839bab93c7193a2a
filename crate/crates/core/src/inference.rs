//! Sequential state estimation from observation, proprioceptive pose and
//! the learned transition prior.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Action, GenerativeModel, ObservationId, Pose, StateId};

/// Posterior over the current state plus a point-estimate pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub state_probs: Vec<f64>,
    pub pose: Pose,
    pub confidence: f64,
}

impl Belief {
    /// One-hot belief on `state` at `pose`.
    pub fn certain(state: StateId, num_states: usize, pose: Pose) -> Self {
        let mut state_probs = vec![0.0; num_states];
        state_probs[state.0] = 1.0;
        Belief {
            state_probs,
            pose,
            confidence: 1.0,
        }
    }

    pub fn from_probs(state_probs: Vec<f64>, pose: Pose) -> Self {
        let confidence = state_probs.iter().copied().fold(0.0, f64::max);
        Belief {
            state_probs,
            pose,
            confidence,
        }
    }

    /// Most probable state; ties go to the lowest id.
    pub fn modal_state(&self) -> StateId {
        let mut best = 0;
        for (i, &p) in self.state_probs.iter().enumerate() {
            if p > self.state_probs[best] {
                best = i;
            }
        }
        StateId(best)
    }

    /// Probability of state `s`, zero for states created after this belief.
    pub fn prob(&self, s: usize) -> f64 {
        self.state_probs.get(s).copied().unwrap_or(0.0)
    }

    /// Extends the vector with zeros for states grown since it was formed.
    pub fn pad_to(&mut self, num_states: usize) {
        if self.state_probs.len() < num_states {
            self.state_probs.resize(num_states, 0.0);
        }
    }
}

/// What the environment reports after an action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub moved: bool,
    pub observation: ObservationId,
    /// Cardinal directions walled off in the room the agent now occupies.
    pub blocked_dirs: BTreeSet<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Localization {
    Confident,
    Lost,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InferenceError {
    #[error("observation {got} outside the model alphabet of size {num_obs}")]
    UnknownObservation { got: usize, num_obs: usize },
    #[error("posterior has no mass; likelihood floors were violated")]
    DegeneratePosterior,
}

pub fn predict_pose(pose: Pose, action: Action, moved: bool) -> Pose {
    if moved {
        pose + action
    } else {
        pose
    }
}

/// Transition-predicted prior `sum_s' B[s | s', a] q(s')` over the model's states.
pub fn predict_states(model: &GenerativeModel, prev: &Belief, action: Action) -> Vec<f64> {
    let n = model.num_states();
    let mut prior = vec![0.0; n];
    for (from, &q) in prev.state_probs.iter().enumerate().take(n) {
        if q == 0.0 {
            continue;
        }
        let column = model.trans_counts(StateId(from), action);
        let total: f64 = column.iter().sum();
        for (p, &c) in prior.iter_mut().zip(column) {
            *p += q * c / total;
        }
    }
    prior
}

/// Bayes update combining `A_o`, `A_p` at the predicted pose, and the transition prior.
pub fn infer_state(
    model: &GenerativeModel,
    prev: &Belief,
    action: Action,
    outcome: &StepOutcome,
) -> Result<Belief, InferenceError> {
    infer_state_with_pose(model, prev, action, outcome, true)
}

/// As [`infer_state`], with `track_pose = false` holding the pose estimate fixed.
pub fn infer_state_with_pose(
    model: &GenerativeModel,
    prev: &Belief,
    action: Action,
    outcome: &StepOutcome,
    track_pose: bool,
) -> Result<Belief, InferenceError> {
    let o = outcome.observation;
    if o.0 >= model.num_obs() {
        return Err(InferenceError::UnknownObservation {
            got: o.0,
            num_obs: model.num_obs(),
        });
    }
    let pose = if track_pose {
        predict_pose(prev.pose, action, outcome.moved)
    } else {
        prev.pose
    };
    let prior = predict_states(model, prev, action);
    let mut post: Vec<f64> = prior
        .iter()
        .enumerate()
        .map(|(s, &pr)| {
            let s = StateId(s);
            model.obs_prob(o, s) * model.pos_prob(pose, s) * pr
        })
        .collect();
    let total: f64 = post.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(InferenceError::DegeneratePosterior);
    }
    post.iter_mut().for_each(|p| *p /= total);
    Ok(Belief::from_probs(post, pose))
}

/// Complexity minus accuracy for the current step.
///
/// `prior_pred` must be the transition-predicted prior used to form `posterior`.
pub fn variational_free_energy(
    model: &GenerativeModel,
    posterior: &Belief,
    prior_pred: &[f64],
    obs: ObservationId,
) -> f64 {
    let mut complexity = 0.0;
    let mut accuracy = 0.0;
    for (s, (&q, &p)) in posterior.state_probs.iter().zip(prior_pred).enumerate() {
        if q > 0.0 {
            complexity += q * (q / p).ln();
            accuracy += q * model.obs_prob(obs, StateId(s)).ln();
        }
    }
    complexity - accuracy
}

pub fn check_confidence(belief: &Belief, threshold: f64) -> Localization {
    if belief.confidence < threshold {
        Localization::Lost
    } else {
        Localization::Confident
    }
}
